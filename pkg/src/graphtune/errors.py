"""Exception types shared across the pipeline."""

from __future__ import annotations


class GraphTuneError(Exception):
    """Base class for all package errors."""


# -- configuration -----------------------------------------------------------


class ConfigError(GraphTuneError, ValueError):
    pass


class OutOfDomain(ConfigError):
    def __init__(self, field: str, value: object, bounds: object):
        self.field = field
        self.value = value
        self.bounds = bounds
        super().__init__(f"{field}={value!r} is outside {bounds!r}")


class UnknownTemplate(ConfigError):
    def __init__(self, identifier: str):
        self.identifier = identifier
        super().__init__(f"unknown prompt template {identifier!r}")


class UnboundPlaceholder(ConfigError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"placeholder {{{name}}} has no value")


# -- datasets ----------------------------------------------------------------


class DatasetError(GraphTuneError):
    pass


class ParseError(DatasetError):
    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class UnknownAdapter(DatasetError):
    pass


class EmptyDataset(DatasetError):
    pass


class InsufficientInstances(DatasetError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        super().__init__(f"need {needed} instances after exclusions, only {available} available")


# -- model gateway -----------------------------------------------------------


class GatewayError(GraphTuneError):
    """A model call failed. ``kind`` is one of transient, fatal, parse_failure."""

    def __init__(self, message: str, kind: str = "fatal"):
        self.kind = kind
        super().__init__(message)


class CacheMiss(GatewayError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no recorded response for request {digest}", kind="fatal")


class MalformedExtraction(GraphTuneError):
    pass


# -- stores ------------------------------------------------------------------


class StoreError(GraphTuneError):
    pass


class DuplicateId(StoreError):
    pass


class UnknownCollection(StoreError):
    pass


class UnknownNode(StoreError):
    pass


class StoreFrozen(StoreError):
    pass


class EmptyStore(StoreError):
    pass


# -- evaluation / optimizer --------------------------------------------------


class EmptyScoreList(GraphTuneError, ValueError):
    pass


class MixedMetrics(GraphTuneError, ValueError):
    pass


class TooFewValues(GraphTuneError, ValueError):
    pass


class StudyClosed(GraphTuneError):
    pass


class NoCompleteTrials(GraphTuneError):
    pass
