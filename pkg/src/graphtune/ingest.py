"""Chunking, model-driven graph extraction and fragment merging."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import CorpusDocument
from .errors import GatewayError, MalformedExtraction
from .gateway import CompletionRequest, Gateway
from .text import TOKEN_RE, collapse_ws, count_tokens, split_sentences

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    token_count: int


@dataclass(frozen=True)
class Entity:
    name: str
    entity_type: str
    description: str


@dataclass(frozen=True)
class GraphFragment:
    entities: tuple[Entity, ...]
    relations: tuple[tuple[str, str, str], ...]
    source_chunk: str
    error: str | None = None


@dataclass
class Node:
    name: str
    entity_type: str
    description: str
    provenance: set[str] = field(default_factory=set)


@dataclass
class Triplet:
    subject_id: str
    predicate: str
    object_id: str
    provenance: set[str] = field(default_factory=set)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.predicate, self.object_id)


@dataclass
class KnowledgeGraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    triplets: list[Triplet] = field(default_factory=list)
    summaries: dict[str, str] = field(default_factory=dict)

    def check_integrity(self, chunk_ids: Iterable[str] | None = None) -> None:
        """Raise AssertionError if an endpoint or provenance id dangles."""
        known = set(chunk_ids) if chunk_ids is not None else None
        for t in self.triplets:
            assert t.subject_id in self.nodes, f"dangling subject {t.subject_id!r}"
            assert t.object_id in self.nodes, f"dangling object {t.object_id!r}"
            if known is not None:
                assert t.provenance <= known, f"triplet {t.key} cites unknown chunks"
        if known is not None:
            for node_id, node in self.nodes.items():
                assert node.provenance <= known, f"node {node_id!r} cites unknown chunks"
            assert set(self.summaries) <= known, "summary for unknown chunk"

    def to_dict(self) -> dict:
        return {
            "nodes": {
                k: {
                    "name": n.name,
                    "entity_type": n.entity_type,
                    "description": n.description,
                    "provenance": sorted(n.provenance),
                }
                for k, n in sorted(self.nodes.items())
            },
            "triplets": [
                [t.subject_id, t.predicate, t.object_id, sorted(t.provenance)] for t in self.triplets
            ],
            "summaries": dict(sorted(self.summaries.items())),
        }


# -- chunking ----------------------------------------------------------------


def _split_word(word: str, budget: int) -> list[str]:
    """Cut a single over-long word at token boundaries."""
    spans = [(m.start(), m.end()) for m in TOKEN_RE.finditer(word)]
    pieces = []
    for i in range(0, len(spans), budget):
        group = spans[i : i + budget]
        start = group[0][0] if i else 0
        end = group[-1][1] if i + budget < len(spans) else len(word)
        pieces.append(word[start:end])
    return pieces


def chunk_document(doc: CorpusDocument, chunk_size: int) -> list[Chunk]:
    """Greedily pack whole sentences into chunks of at most ``chunk_size`` tokens.

    A sentence longer than the budget is packed word by word; a single word
    longer than the budget is cut at token boundaries. Chunk texts joined
    with single spaces give back the whitespace-collapsed document.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    texts: list[str] = []
    current: list[str] = []
    used = 0

    def flush():
        nonlocal current, used
        if current:
            texts.append(" ".join(current))
        current, used = [], 0

    for sentence in split_sentences(doc.text):
        cost = count_tokens(sentence)
        if cost <= chunk_size:
            if used + cost > chunk_size:
                flush()
            current.append(collapse_ws(sentence))
            used += cost
            continue
        flush()
        for word in sentence.split():
            wcost = count_tokens(word)
            if wcost > chunk_size:
                flush()
                pieces = _split_word(word, chunk_size)
                texts.extend(pieces[:-1])
                word, wcost = pieces[-1], count_tokens(pieces[-1])
            if used + wcost > chunk_size:
                flush()
            current.append(word)
            used += wcost
    flush()
    return [
        Chunk(f"{doc.doc_id}:{i}", doc.doc_id, i, text, count_tokens(text))
        for i, text in enumerate(t for t in texts if t)
    ]


# -- extraction --------------------------------------------------------------

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def parse_extraction(reply: str, source_chunk: str) -> GraphFragment:
    """Parse a fenced ``ENTITY``/``REL`` block into a fragment.

    Relations naming an entity absent from the block are dropped with a
    warning. Raises MalformedExtraction when there is no fenced block or a
    line in it is not a well-formed item.
    """
    m = _FENCE.search(reply)
    if m is None:
        raise MalformedExtraction("no fenced extraction block")
    entities: dict[str, Entity] = {}
    relations: list[tuple[str, str, str]] = []
    for raw in m.group(1).splitlines():
        line = raw.strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        parts = [p.strip() for p in rest.split("|")]
        if kind not in ("ENTITY", "REL") or len(parts) != 3 or not parts[0]:
            raise MalformedExtraction(f"bad extraction line {line!r}")
        if kind == "ENTITY":
            entities.setdefault(parts[0], Entity(*parts))
        else:
            if not parts[1] or not parts[2]:
                raise MalformedExtraction(f"bad relation line {line!r}")
            relations.append((parts[0], parts[1], parts[2]))
    kept = []
    for s, p, o in relations:
        if s in entities and o in entities:
            kept.append((s, p, o))
        else:
            log.warning("chunk %s: dropping relation (%s, %s, %s) with unknown endpoint", source_chunk, s, p, o)
    return GraphFragment(tuple(entities.values()), tuple(dict.fromkeys(kept)), source_chunk)


def extract_graph_fragment(
    chunk: Chunk,
    graph_prompt: str,
    gateway: Gateway,
    parse_attempts: int = 2,
) -> GraphFragment:
    """Ask the model for a fragment; after ``parse_attempts`` bad replies, give up.

    A chunk whose replies never parse contributes an empty fragment carrying
    the MalformedExtraction message. Gateway errors propagate.
    """
    request = CompletionRequest(f"graph/{graph_prompt}", {"text": chunk.text})
    problem = None
    for _ in range(parse_attempts):
        reply = gateway.complete(request)
        try:
            return parse_extraction(reply, chunk.chunk_id)
        except MalformedExtraction as exc:
            problem = exc
    log.warning("chunk %s: extraction unparseable after %d attempts: %s", chunk.chunk_id, parse_attempts, problem)
    return GraphFragment((), (), chunk.chunk_id, error=f"MalformedExtraction: {problem}")


def summarize_chunk(chunk: Chunk, gateway: Gateway, template: str = "summarization/default") -> str | None:
    """One-sentence summary, or None if the model call fails."""
    try:
        summary = gateway.complete(CompletionRequest(template, {"text": chunk.text})).strip()
    except GatewayError as exc:
        log.warning("chunk %s: summary failed: %s", chunk.chunk_id, exc)
        return None
    return summary or None


# -- merging -----------------------------------------------------------------


def canonical_name(name: str) -> str:
    return " ".join(name.casefold().split())


def merge_fragments(fragments: Sequence[GraphFragment]) -> KnowledgeGraph:
    """Merge fragments in order; the first description seen for a node wins."""
    graph = KnowledgeGraph()
    index: dict[tuple[str, str, str], Triplet] = {}
    for frag in fragments:
        for ent in frag.entities:
            node_id = canonical_name(ent.name)
            if not node_id:
                continue
            node = graph.nodes.get(node_id)
            if node is None:
                node = graph.nodes[node_id] = Node(ent.name, ent.entity_type, ent.description)
            node.provenance.add(frag.source_chunk)
        for s, p, o in frag.relations:
            key = (canonical_name(s), p, canonical_name(o))
            if key[0] not in graph.nodes or key[2] not in graph.nodes:
                continue
            trip = index.get(key)
            if trip is None:
                trip = index[key] = Triplet(*key)
                graph.triplets.append(trip)
            trip.provenance.add(frag.source_chunk)
    return graph


def fragments_from_graph(graph: KnowledgeGraph) -> list[GraphFragment]:
    """Split a merged graph back into one fragment per provenance chunk."""
    chunk_ids = sorted(
        {c for n in graph.nodes.values() for c in n.provenance}
        | {c for t in graph.triplets for c in t.provenance}
    )
    frags = []
    for cid in chunk_ids:
        ents = [Entity(n.name, n.entity_type, n.description) for n in graph.nodes.values() if cid in n.provenance]
        rels = [
            (graph.nodes[t.subject_id].name, t.predicate, graph.nodes[t.object_id].name)
            for t in graph.triplets
            if cid in t.provenance
        ]
        frags.append(GraphFragment(tuple(ents), tuple(rels), cid))
    return frags
