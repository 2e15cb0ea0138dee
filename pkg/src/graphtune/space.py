"""Tunable parameter space, pipeline configurations and the untuned baseline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Iterable, Union

from .errors import ConfigError, OutOfDomain, UnknownTemplate

SEARCH_STRATEGIES = ("chunk_completion", "graph_completion")
QA_PROMPTS = ("default", "concise", "direct")
GRAPH_PROMPTS = ("default", "incremental", "strict")
TASK_GETTERS = ("with_summaries", "without_summaries")

# Dimensions whose values name prompt templates; rejections raise UnknownTemplate.
TEMPLATE_FIELDS = ("qa_prompt", "graph_prompt")


@dataclass(frozen=True)
class Categorical:
    name: str
    choices: tuple[str, ...]

    def __post_init__(self):
        if not self.choices:
            raise ConfigError(f"categorical dimension {self.name!r} has no choices")
        if len(set(self.choices)) != len(self.choices):
            raise ConfigError(f"categorical dimension {self.name!r} has duplicate choices")

    def contains(self, value: Any) -> bool:
        return value in self.choices

    @property
    def bounds(self) -> tuple[str, ...]:
        return self.choices


@dataclass(frozen=True)
class IntegerRange:
    """Inclusive integer range sampled on ``low, low + step, ..., high``."""

    name: str
    low: int
    high: int
    step: int = 1

    def __post_init__(self):
        if self.low > self.high:
            raise ConfigError(f"dimension {self.name!r}: low {self.low} > high {self.high}")
        if self.step < 1 or (self.high - self.low) % self.step:
            raise ConfigError(f"dimension {self.name!r}: step {self.step} does not tile the range")

    def contains(self, value: Any) -> bool:
        return (
            isinstance(value, int)
            and not isinstance(value, bool)
            and self.low <= value <= self.high
        )

    @property
    def bounds(self) -> tuple[int, int]:
        return (self.low, self.high)

    def grid(self) -> list[int]:
        return list(range(self.low, self.high + 1, self.step))


Dimension = Union[Categorical, IntegerRange]


@dataclass(frozen=True)
class PipelineConfig:
    chunk_size: int
    search_type: str
    top_k: int
    qa_prompt: str
    graph_prompt: str
    task_getter: str

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in data]
        if missing:
            raise ConfigError(f"config is missing fields: {', '.join(missing)}")
        extra = sorted(set(data) - set(names))
        if extra:
            raise ConfigError(f"config has unknown fields: {', '.join(extra)}")
        return cls(**{n: data[n] for n in names})

    def replace(self, **changes: Any) -> "PipelineConfig":
        return PipelineConfig.from_dict({**self.to_dict(), **changes})


CONFIG_FIELDS = tuple(f.name for f in fields(PipelineConfig))


def _dimension_rank(dim: "Dimension") -> tuple[int, str]:
    name = dim.name
    return (CONFIG_FIELDS.index(name) if name in CONFIG_FIELDS else len(CONFIG_FIELDS), name)


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dimension names in {names}")
        # Canonical order (config field order): sampling consumes the RNG per
        # dimension, so the order must survive a round trip through sorted JSON.
        object.__setattr__(self, "dimensions", tuple(sorted(self.dimensions, key=_dimension_rank)))

    def __getitem__(self, name: str) -> Dimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise KeyError(name)

    def __iter__(self):
        return iter(self.dimensions)

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for dim in self.dimensions:
            if isinstance(dim, Categorical):
                out[dim.name] = {"type": "categorical", "choices": list(dim.choices)}
            else:
                out[dim.name] = {
                    "type": "int",
                    "low": dim.low,
                    "high": dim.high,
                    "step": dim.step,
                }
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchSpace":
        dims: list[Dimension] = []
        for name, spec in data.items():
            kind = spec.get("type")
            if kind == "categorical":
                dims.append(Categorical(name, tuple(spec["choices"])))
            elif kind == "int":
                dims.append(IntegerRange(name, int(spec["low"]), int(spec["high"]), int(spec.get("step", 1))))
            else:
                raise ConfigError(f"dimension {name!r} has unknown type {kind!r}")
        return cls(tuple(dims))


def default_search_space() -> SearchSpace:
    return SearchSpace(
        (
            IntegerRange("chunk_size", 200, 2000, step=100),
            Categorical("search_type", SEARCH_STRATEGIES),
            IntegerRange("top_k", 1, 20),
            Categorical("qa_prompt", QA_PROMPTS),
            Categorical("graph_prompt", GRAPH_PROMPTS),
            Categorical("task_getter", TASK_GETTERS),
        )
    )


_BASELINE = PipelineConfig(
    chunk_size=1024,
    search_type="chunk_completion",
    top_k=5,
    qa_prompt="default",
    graph_prompt="default",
    task_getter="with_summaries",
)


def baseline_config() -> PipelineConfig:
    """The untuned configuration every study is compared against.

    These values are fixed choices of this package: a mid-sized chunk, plain
    chunk retrieval and the conversational answer template.
    """
    return _BASELINE


def validate_config(config: PipelineConfig, space: SearchSpace | None = None) -> PipelineConfig:
    """Return ``config`` unchanged if every field is inside ``space``.

    ``chunk_size`` is checked against the inclusive bounds only, so values off
    the sampling grid (e.g. the baseline's 1024) are accepted.
    """
    space = space or default_search_space()
    values = config.to_dict()
    for dim in space:
        if dim.name not in values:
            raise ConfigError(f"config has no field for dimension {dim.name!r}")
        value = values[dim.name]
        if dim.contains(value):
            continue
        if dim.name in TEMPLATE_FIELDS:
            raise UnknownTemplate(str(value))
        raise OutOfDomain(dim.name, value, dim.bounds)
    return config


def override_space(space: SearchSpace, overrides: dict[str, Any]) -> SearchSpace:
    """Apply per-dimension overrides from a study file.

    Integer dimensions accept ``low``/``high``/``step`` keys, categorical ones
    ``choices``; dimensions not mentioned are left as they are.
    """
    unknown = sorted(set(overrides) - set(space.names))
    if unknown:
        raise ConfigError(f"unknown search-space dimensions: {', '.join(unknown)}")
    dims: list[Dimension] = []
    for dim in space:
        spec = overrides.get(dim.name)
        if spec is None:
            dims.append(dim)
        elif isinstance(dim, Categorical):
            dims.append(Categorical(dim.name, tuple(spec.get("choices", dim.choices))))
        else:
            dims.append(
                IntegerRange(
                    dim.name,
                    int(spec.get("low", dim.low)),
                    int(spec.get("high", dim.high)),
                    int(spec.get("step", dim.step)),
                )
            )
    return SearchSpace(tuple(dims))


def iter_choices(dim: Dimension) -> Iterable[Any]:
    return dim.choices if isinstance(dim, Categorical) else dim.grid()
