"""Context retrieval strategies and answer generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import GatewayError
from .gateway import CompletionRequest, Gateway
from .ingest import KnowledgeGraph, Triplet
from .stores import TrialStores
from .text import TOKEN_RE

log = logging.getLogger(__name__)

# Strategies the optimizer may pick come first.
STRATEGIES = (
    "chunk_completion",
    "graph_completion",
    "summary_based",
    "chunk_direct",
    "graph_neighborhood",
    "graph_summary_completion",
)
NO_GENERATION = frozenset({"summary_based", "chunk_direct", "graph_neighborhood"})
SEPARATOR = "\n---\n"
DESCRIPTION_TOKENS = 30


@dataclass(frozen=True)
class ContextBundle:
    strategy: str
    items: tuple[tuple[str, str], ...]
    rendered_context: str
    generate: bool = True
    warning: str | None = None


def _bundle(strategy: str, items: list[tuple[str, str]], warning: str | None = None) -> ContextBundle:
    if warning:
        log.warning("%s: %s", strategy, warning)
    return ContextBundle(
        strategy,
        tuple(items),
        SEPARATOR.join(text for _, text in items),
        generate=strategy not in NO_GENERATION,
        warning=warning,
    )


def _truncate(text: str, limit: int = DESCRIPTION_TOKENS) -> str:
    for i, m in enumerate(TOKEN_RE.finditer(text)):
        if i == limit - 1:
            return text[: m.end()]
    return text


def format_triplet(triplet: Triplet, graph: KnowledgeGraph) -> str:
    s = graph.nodes[triplet.subject_id]
    o = graph.nodes[triplet.object_id]
    return (
        f"{s.name} —[{triplet.predicate}]→ {o.name} :: "
        f"{_truncate(s.description or '')} | {_truncate(o.description or '')}"
    )


def triplet_id(t: Triplet) -> str:
    return f"{t.subject_id}|{t.predicate}|{t.object_id}"


def _chunk_hits(question: str, top_k: int, stores: TrialStores) -> list[str]:
    """Chunk ids ranked by similarity; a chunk's summary can lift its rank."""
    chunks = stores.collections["chunks"]
    best = {h.item_id: h.score for h in stores.vector_search("chunks", question, len(chunks))}
    if len(stores.collections["summaries"]):
        for h in stores.vector_search("summaries", question, len(stores.collections["summaries"])):
            if h.item_id in best:
                best[h.item_id] = max(best[h.item_id], h.score)
    ranked = sorted(best, key=lambda cid: (-best[cid], cid))
    return ranked[:top_k]


def _graph_triplets(question: str, top_k: int, stores: TrialStores) -> list[Triplet]:
    n_nodes = len(stores.collections["nodes"])
    if n_nodes == 0:
        return []
    picked: dict[tuple[str, str, str], Triplet] = {}
    for hit in stores.vector_search("nodes", question, n_nodes):
        for t in stores.neighborhood(hit.item_id, radius=1):
            picked.setdefault(t.key, t)
            if len(picked) >= top_k:
                return list(picked.values())
    return list(picked.values())


def retrieve(
    question: str,
    strategy: str,
    top_k: int,
    stores: TrialStores,
    gateway: Gateway | None = None,
) -> ContextBundle:
    """Select at most ``top_k`` context items for ``question``.

    An empty source collection yields an empty bundle with a warning rather
    than an error, so the answerer still runs (and abstains).
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")

    if strategy in ("chunk_completion", "chunk_direct"):
        if not len(stores.collections["chunks"]):
            return _bundle(strategy, [], "EmptyStore: no chunks indexed")
        ids = _chunk_hits(question, top_k, stores)
        return _bundle(strategy, [(i, stores.text_of("chunks", i)) for i in ids])

    if strategy == "summary_based":
        hits = stores.vector_search("summaries", question, top_k)
        if not hits:
            return _bundle(strategy, [], "EmptyStore: no summaries indexed")
        return _bundle(strategy, [(h.item_id, stores.text_of("summaries", h.item_id)) for h in hits])

    graph = stores.graph
    if strategy == "graph_neighborhood":
        hits = stores.vector_search("nodes", question, 1)
        if not hits:
            return _bundle(strategy, [], "EmptyStore: no nodes indexed")
        trips = stores.neighborhood(hits[0].item_id, radius=1)[:top_k]
        return _bundle(strategy, [(triplet_id(t), format_triplet(t, graph)) for t in trips])

    trips = _graph_triplets(question, top_k, stores)
    if not trips:
        return _bundle(strategy, [], "EmptyStore: graph has no triplets")
    items = [(triplet_id(t), format_triplet(t, graph)) for t in trips]
    if strategy == "graph_completion":
        return _bundle(strategy, items)

    # graph_summary_completion
    if gateway is None:
        raise ValueError("graph_summary_completion needs a gateway")
    joined = "\n".join(text for _, text in items)
    try:
        summary = gateway.complete(CompletionRequest("summarization/default", {"text": joined})).strip()
    except GatewayError as exc:
        return _bundle(strategy, [], f"subgraph summary failed: {exc}")
    return _bundle(strategy, [("graph-summary", summary)])


def answer(question: str, bundle: ContextBundle, qa_prompt: str, gateway: Gateway) -> str:
    if not bundle.generate:
        raise ValueError(f"strategy {bundle.strategy} returns context without generation")
    request = CompletionRequest(f"qa/{qa_prompt}", {"question": question, "context": bundle.rendered_context})
    return gateway.complete(request).strip()
