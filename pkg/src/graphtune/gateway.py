"""The single boundary for model calls: prompt registry and backends.

Three backends share one interface:

* ``MockBackend`` - deterministic rule engine (see :mod:`graphtune.mock`).
* ``LiveBackend`` - OpenAI-compatible HTTP endpoints.
* ``ReplayBackend`` - on-disk record/replay cache wrapping another backend.

No other module performs network activity.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx
import numpy as np

from .errors import CacheMiss, GatewayError, UnboundPlaceholder, UnknownTemplate

log = logging.getLogger(__name__)

ROLE_DIRS = {
    "qa_system": "qa",
    "graph_extraction": "graph",
    "grading": "grading",
    "summarization": "summarization",
}
_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def offline() -> bool:
    return os.environ.get("GT_OFFLINE", "").strip().lower() in ("1", "true", "yes")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    role: str
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(_PLACEHOLDER.findall(self.body)))

    def render(self, variables: Mapping[str, str]) -> str:
        for name in self.placeholders:
            if name not in variables:
                raise UnboundPlaceholder(name)
        return _PLACEHOLDER.sub(lambda m: str(variables[m.group(1)]), self.body)


class PromptRegistry:
    """Templates keyed by ``<dir>/<stem>``, e.g. ``qa/concise``."""

    def __init__(self, templates: Mapping[str, PromptTemplate] | None = None):
        self._templates: dict[str, PromptTemplate] = dict(templates or {})

    @classmethod
    def from_directory(cls, root: str | Path | None = None) -> "PromptRegistry":
        reg = cls()
        if root is None:
            base = resources.files("graphtune") / "prompts"
        else:
            base = Path(root)
        for role, sub in ROLE_DIRS.items():
            folder = base / sub
            if not folder.is_dir():
                continue
            for entry in sorted(folder.iterdir(), key=lambda p: p.name):
                if entry.name.endswith(".txt"):
                    stem = entry.name[: -len(".txt")]
                    reg.add(PromptTemplate(f"{sub}/{stem}", role, entry.read_text(encoding="utf-8")))
        return reg

    def add(self, template: PromptTemplate) -> None:
        self._templates[template.template_id] = template

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def resolve(self, role: str, name: str) -> PromptTemplate:
        return self.get(f"{ROLE_DIRS[role]}/{name}")

    def names(self, role: str) -> list[str]:
        prefix = ROLE_DIRS[role] + "/"
        return sorted(t[len(prefix):] for t in self._templates if t.startswith(prefix))

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates

    def render(self, template_id: str, variables: Mapping[str, str]) -> str:
        return self.get(template_id).render(variables)


_DEFAULT_REGISTRY: PromptRegistry | None = None


def default_registry() -> PromptRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = PromptRegistry.from_directory()
    return _DEFAULT_REGISTRY


def render(template_id: str, variables: Mapping[str, str]) -> str:
    return default_registry().render(template_id, variables)


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_output_tokens: int = 512


@dataclass(frozen=True)
class CompletionRequest:
    template_id: str
    variables: Mapping[str, str] = field(default_factory=dict)
    decoding: Decoding = Decoding()


def request_digest(model: str, rendered: str, decoding: Decoding) -> str:
    """Cache key: sha256 over a canonical JSON encoding of the request."""
    payload = {
        "model": model,
        "prompt": rendered,
        "temperature": decoding.temperature,
        "max_output_tokens": decoding.max_output_tokens,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def embedding_digest(model: str, text: str) -> str:
    blob = json.dumps({"model": model, "embed": text}, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Backend(Protocol):
    model: str

    def complete(self, role: str, request: CompletionRequest, rendered: str) -> str: ...

    def embed(self, text: str) -> np.ndarray: ...


# -- live --------------------------------------------------------------------


class LiveBackend:
    """OpenAI-compatible chat-completions and embeddings client.

    Reads GT_LLM_BASE_URL, GT_LLM_MODEL, GT_LLM_API_KEY and GT_EMBED_MODEL.
    Transient failures (transport errors, 429, 5xx) are retried with
    exponential backoff; other HTTP errors are fatal.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        embed_model: str | None = None,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = (base_url or os.environ.get("GT_LLM_BASE_URL", "https://api.openai.com/v1")).rstrip("/")
        self.model = model or os.environ.get("GT_LLM_MODEL", "")
        self.embed_model = embed_model or os.environ.get("GT_EMBED_MODEL", "")
        self.api_key = api_key if api_key is not None else os.environ.get("GT_LLM_API_KEY", "")
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._transport = transport
        self._client: httpx.Client | None = None

    def _http(self) -> httpx.Client:
        if self._client is None:
            headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
            self._client = httpx.Client(timeout=self.timeout, headers=headers, transport=self._transport)
        return self._client

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        if offline():
            raise GatewayError("GT_OFFLINE is set; live model calls are disabled", kind="fatal")
        url = f"{self.base_url}/{path}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._http().post(url, json=payload)
            except httpx.TransportError as exc:
                last = exc
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = GatewayError(f"HTTP {resp.status_code} from {url}", kind="transient")
                elif resp.status_code >= 400:
                    raise GatewayError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}", kind="fatal")
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise GatewayError(f"non-JSON response from {url}", kind="parse_failure") from exc
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise GatewayError(f"giving up on {url} after {self.retries + 1} attempts: {last}", kind="transient")

    def complete(self, role: str, request: CompletionRequest, rendered: str) -> str:
        if not self.model:
            raise GatewayError("GT_LLM_MODEL is not set", kind="fatal")
        body = self._post(
            "chat/completions",
            {
                "model": self.model,
                "messages": [{"role": "user", "content": rendered}],
                "temperature": request.decoding.temperature,
                "max_tokens": request.decoding.max_output_tokens,
            },
        )
        try:
            return body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError("unexpected chat-completion payload", kind="parse_failure") from exc

    def embed(self, text: str) -> np.ndarray:
        if not self.embed_model:
            raise GatewayError("GT_EMBED_MODEL is not set", kind="fatal")
        body = self._post("embeddings", {"model": self.embed_model, "input": text})
        try:
            return np.asarray(body["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError("unexpected embeddings payload", kind="parse_failure") from exc


# -- replay ------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ReplayBackend:
    """Record/replay cache: one JSON envelope per request, named by digest.

    With ``strict=True`` a miss raises :class:`CacheMiss` instead of falling
    through to ``upstream``.
    """

    def __init__(self, cache_dir: str | Path, upstream: Backend | None = None, strict: bool = False):
        self.cache_dir = Path(cache_dir)
        self.upstream = upstream
        self.strict = strict or upstream is None
        self.model = upstream.model if upstream is not None else os.environ.get("GT_LLM_MODEL", "replay")
        self.upstream_calls = 0

    def _lookup(self, digest: str) -> dict[str, Any] | None:
        path = self.cache_dir / f"{digest}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _miss(self, digest: str) -> Backend:
        if self.strict or self.upstream is None:
            raise CacheMiss(digest)
        self.upstream_calls += 1
        return self.upstream

    def complete(self, role: str, request: CompletionRequest, rendered: str) -> str:
        digest = request_digest(self.model, rendered, request.decoding)
        hit = self._lookup(digest)
        if hit is not None:
            return hit["response"]
        text = self._miss(digest).complete(role, request, rendered)
        envelope = {
            "digest": digest,
            "request": {
                "model": self.model,
                "role": role,
                "template_id": request.template_id,
                "prompt": rendered,
                "temperature": request.decoding.temperature,
                "max_output_tokens": request.decoding.max_output_tokens,
            },
            "response": text,
        }
        _atomic_write(self.cache_dir / f"{digest}.json", json.dumps(envelope, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
        return text

    def embed(self, text: str) -> np.ndarray:
        digest = embedding_digest(self.model, text)
        hit = self._lookup(digest)
        if hit is not None:
            return np.asarray(hit["response"], dtype=float)
        vec = self._miss(digest).embed(text)
        envelope = {"digest": digest, "request": {"model": self.model, "embed": text}, "response": [float(x) for x in vec]}
        _atomic_write(self.cache_dir / f"{digest}.json", json.dumps(envelope, sort_keys=True, ensure_ascii=False) + "\n")
        return vec


# -- facade ------------------------------------------------------------------


class Gateway:
    """Renders templates, dispatches to a backend, and counts calls per role."""

    def __init__(self, backend: Backend, registry: PromptRegistry | None = None):
        self.backend = backend
        self.registry = registry or default_registry()
        self.calls: Counter[str] = Counter()
        self._lock = threading.Lock()

    @property
    def model(self) -> str:
        return self.backend.model

    def render(self, template_id: str, variables: Mapping[str, str]) -> str:
        return self.registry.render(template_id, variables)

    def complete(self, request: CompletionRequest) -> str:
        template = self.registry.get(request.template_id)
        rendered = template.render(request.variables)
        with self._lock:
            self.calls[template.role] += 1
        return self.backend.complete(template.role, request, rendered)

    def embed_text(self, text: str) -> np.ndarray:
        with self._lock:
            self.calls["embedding"] += 1
        return self.backend.embed(text)


def make_gateway(
    backend: str = "mock",
    cache_dir: str | Path | None = None,
    strict: bool | None = None,
    registry: PromptRegistry | None = None,
) -> Gateway:
    """Build a gateway for ``backend`` in {mock, live, replay}.

    ``replay`` wraps the live backend unless GT_OFFLINE is set, in which case
    it is strict (misses raise).
    """
    from .mock import MockBackend

    if backend == "mock":
        return Gateway(MockBackend(), registry)
    if backend == "live":
        return Gateway(LiveBackend(), registry)
    if backend == "replay":
        if cache_dir is None:
            raise GatewayError("replay backend needs a cache directory", kind="fatal")
        strict = offline() if strict is None else strict
        upstream = None if strict else LiveBackend()
        return Gateway(ReplayBackend(cache_dir, upstream, strict=strict), registry)
    raise GatewayError(f"unknown backend {backend!r}", kind="fatal")
