"""In-memory graph, vector and metadata stores scoped to one trial."""

from __future__ import annotations

import json
import threading
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import DuplicateId, StoreFrozen, UnknownCollection, UnknownNode
from .ingest import KnowledgeGraph, Node, Triplet
from .mock import EMBED_DIM, hashed_embedding

if TYPE_CHECKING:
    from .gateway import Gateway

COLLECTIONS = ("chunks", "summaries", "nodes")
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class VectorHit:
    item_id: str
    collection: str
    score: float


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class _Collection:
    def __init__(self):
        self.ids: list[str] = []
        self.texts: dict[str, str] = {}
        self.vectors: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.ids)

    def matrix(self) -> np.ndarray:
        if self._matrix is None or len(self._matrix) != len(self.ids):
            self._matrix = np.vstack(self.vectors)
        return self._matrix


class TrialStores:
    """Graph store, vector index and QA metadata table for a single trial.

    Writes happen during the build phase; :meth:`freeze` ends it, after which
    any number of threads may read. :meth:`reset_all` empties everything and
    reopens the stores for writing.
    """

    def __init__(self, gateway: "Gateway | None" = None, dim: int = EMBED_DIM):
        self.gateway = gateway
        self.dim = dim
        self._lock = threading.Lock()
        self.reset_all()

    # -- lifecycle -----------------------------------------------------------

    def reset_all(self) -> None:
        with self._lock:
            self.graph = KnowledgeGraph()
            self.collections = {name: _Collection() for name in COLLECTIONS}
            self.metadata: list[dict] = []
            self.frozen = False
            self._adjacency: dict[str, set[str]] | None = None

    def freeze(self) -> None:
        self.frozen = True
        self._adjacency = None

    def _writable(self) -> None:
        if self.frozen:
            raise StoreFrozen("stores are frozen; call reset_all() before writing")

    def counts(self) -> dict[str, int]:
        out = {f"vectors.{name}": len(c) for name, c in self.collections.items()}
        out["graph.nodes"] = len(self.graph.nodes)
        out["graph.triplets"] = len(self.graph.triplets)
        out["graph.summaries"] = len(self.graph.summaries)
        out["metadata"] = len(self.metadata)
        return out

    # -- vectors -------------------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        if self.gateway is None:
            return hashed_embedding(text, self.dim)
        return np.asarray(self.gateway.embed_text(text), dtype=float)

    def _collection(self, name: str) -> _Collection:
        try:
            return self.collections[name]
        except KeyError:
            raise UnknownCollection(f"unknown collection {name!r}; expected one of {COLLECTIONS}") from None

    def index_items(self, collection: str, items: Sequence[tuple[str, str]]) -> None:
        coll = self._collection(collection)
        with self._lock:
            self._writable()
            fresh: set[str] = set()
            for item_id, _ in items:
                if item_id in coll.texts or item_id in fresh:
                    raise DuplicateId(f"{collection}: id {item_id!r} already indexed")
                fresh.add(item_id)
            for item_id, text in items:
                coll.ids.append(item_id)
                coll.texts[item_id] = text
                coll.vectors.append(self.embed(text))

    def text_of(self, collection: str, item_id: str) -> str:
        return self._collection(collection).texts[item_id]

    def vector_search(self, collection: str, query: str, k: int) -> list[VectorHit]:
        if k < 1:
            raise ValueError("k must be >= 1")
        coll = self._collection(collection)
        if not coll.ids:
            return []
        q = self.embed(query)
        mat = coll.matrix()
        norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(q)
        with np.errstate(invalid="ignore", divide="ignore"):
            scores = np.where(norms > 0, mat @ q / np.where(norms > 0, norms, 1.0), 0.0)
        scores = np.clip(scores, -1.0, 1.0)
        order = sorted(range(len(coll.ids)), key=lambda i: (-scores[i], coll.ids[i]))
        return [VectorHit(coll.ids[i], collection, float(scores[i])) for i in order[:k]]

    # -- graph ---------------------------------------------------------------

    def load_graph(self, graph: KnowledgeGraph) -> None:
        with self._lock:
            self._writable()
            self.graph = graph
            self._adjacency = None

    def _adj(self) -> dict[str, set[str]]:
        if self._adjacency is None:
            adj: dict[str, set[str]] = defaultdict(set)
            for t in self.graph.triplets:
                adj[t.subject_id].add(t.object_id)
                adj[t.object_id].add(t.subject_id)
            self._adjacency = adj
        return self._adjacency

    def neighborhood(self, node_id: str, radius: int = 1) -> list[Triplet]:
        """Triplets touching any node within ``radius - 1`` hops of ``node_id``."""
        if node_id not in self.graph.nodes:
            raise UnknownNode(node_id)
        if radius < 1:
            raise ValueError("radius must be >= 1")
        adj = self._adj()
        seen = {node_id}
        frontier = deque([(node_id, 0)])
        while frontier:
            node, dist = frontier.popleft()
            if dist == radius - 1:
                continue
            for nxt in sorted(adj.get(node, ())):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append((nxt, dist + 1))
        hits = [t for t in self.graph.triplets if t.subject_id in seen or t.object_id in seen]
        return sorted(hits, key=lambda t: t.key)

    # -- metadata ------------------------------------------------------------

    def add_qa_pairs(self, rows: Iterable[dict]) -> None:
        with self._lock:
            self._writable()
            self.metadata.extend(dict(r) for r in rows)

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> str:
        body = {
            "format": "graphtune-stores",
            "version": SNAPSHOT_VERSION,
            "dim": self.dim,
            "collections": {
                name: [[i, c.texts[i], [float(x) for x in v]] for i, v in zip(c.ids, c.vectors)]
                for name, c in self.collections.items()
            },
            "graph": self.graph.to_dict(),
            "metadata": self.metadata,
        }
        return json.dumps(body, sort_keys=True, ensure_ascii=False)

    def save_snapshot(self, path: str | Path) -> None:
        Path(path).write_text(self.snapshot() + "\n", encoding="utf-8")

    @classmethod
    def from_snapshot(cls, text: str, gateway: "Gateway | None" = None) -> "TrialStores":
        body = json.loads(text)
        if body.get("format") != "graphtune-stores" or body.get("version") != SNAPSHOT_VERSION:
            raise ValueError("not a graphtune store snapshot of a supported version")
        stores = cls(gateway, dim=body["dim"])
        for name, rows in body["collections"].items():
            coll = stores._collection(name)
            for item_id, text_, vec in rows:
                coll.ids.append(item_id)
                coll.texts[item_id] = text_
                coll.vectors.append(np.asarray(vec, dtype=float))
        g = body["graph"]
        graph = KnowledgeGraph()
        for node_id, n in g["nodes"].items():
            graph.nodes[node_id] = Node(n["name"], n["entity_type"], n["description"], set(n["provenance"]))
        graph.triplets = [Triplet(s, p, o, set(prov)) for s, p, o, prov in g["triplets"]]
        graph.summaries = dict(g["summaries"])
        stores.graph = graph
        stores.metadata = list(body["metadata"])
        stores.freeze()
        return stores
