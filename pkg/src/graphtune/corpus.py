"""Benchmark loading, filtered train/test splits and training documents."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import DatasetError, EmptyDataset, InsufficientInstances, ParseError, UnknownAdapter

ADAPTERS = ("hotpotqa", "twowiki", "musique")


@dataclass(frozen=True)
class QAInstance:
    id: str
    question: str
    gold_answer: str
    passages: tuple[tuple[str, str], ...]
    # Extra accepted answers; only the correctness grader sees them.
    aliases: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "passages": [list(p) for p in self.passages],
            "aliases": list(self.aliases),
        }


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[QAInstance, ...]
    test: tuple[QAInstance, ...]
    seed: int
    exclusion_ids: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class CorpusDocument:
    doc_id: str
    title: str
    text: str
    content_hash: str


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- loading -----------------------------------------------------------------


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror or exc}") from None


def _read_records(path: Path) -> list[tuple[str, Any]]:
    raw = _read_text(path)
    if not raw.strip():
        raise EmptyDataset(f"{path} is empty")
    stripped = raw.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc
        return [(f"record {i}", rec) for i, rec in enumerate(data)]
    records = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append((f"line {lineno}", json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}", exc.msg) from exc
    return records


def _split_answer(answer: Any, extra: Iterable[Any] = ()) -> tuple[str, tuple[str, ...]]:
    answers = list(answer) if isinstance(answer, list) else [answer]
    answers += list(extra)
    answers = [str(a) for a in answers if a is not None and str(a).strip()]
    if not answers:
        raise ValueError("no answer")
    aliases = tuple(dict.fromkeys(a for a in answers[1:] if a != answers[0]))
    return answers[0], aliases


def _from_hotpot_like(rec: dict[str, Any]) -> QAInstance:
    passages = []
    for entry in rec["context"]:
        title, sentences = entry[0], entry[1]
        if isinstance(sentences, str):
            sentences = [sentences]
        body = " ".join(s.strip() for s in sentences if s.strip())
        passages.append((str(title), body))
    gold, aliases = _split_answer(rec["answer"])
    return QAInstance(str(rec["_id"]), str(rec["question"]).strip(), gold, tuple(passages), aliases)


def _from_musique(rec: dict[str, Any]) -> QAInstance:
    passages = [(str(p["title"]), str(p["paragraph_text"]).strip()) for p in rec["paragraphs"]]
    gold, aliases = _split_answer(rec["answer"], rec.get("answer_aliases", ()))
    return QAInstance(str(rec["id"]), str(rec["question"]).strip(), gold, tuple(passages), aliases)


_CONVERTERS = {
    "hotpotqa": _from_hotpot_like,
    "twowiki": _from_hotpot_like,
    "musique": _from_musique,
}


def load_benchmark(path: str | Path, adapter: str) -> list[QAInstance]:
    if adapter not in _CONVERTERS:
        raise UnknownAdapter(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
    path = Path(path)
    convert = _CONVERTERS[adapter]
    instances = []
    seen: set[str] = set()
    for location, rec in _read_records(path):
        try:
            inst = convert(rec)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ParseError(f"{path} {location}", f"malformed {adapter} record ({exc!r})") from exc
        if not inst.question or not inst.gold_answer:
            raise ParseError(f"{path} {location}", "empty question or answer")
        if not inst.passages:
            raise ParseError(f"{path} {location}", "record has no passages")
        if inst.id in seen:
            raise ParseError(f"{path} {location}", f"duplicate id {inst.id!r}")
        seen.add(inst.id)
        instances.append(inst)
    if not instances:
        raise EmptyDataset(f"{path} contains no records")
    return instances


def read_exclusions(path: str | Path | None) -> frozenset[str]:
    """One instance id per line; ``#`` starts a comment."""
    if path is None:
        return frozenset()
    ids = set()
    for line in _read_text(Path(path)).splitlines():
        entry = line.split("#", 1)[0].strip()
        if entry:
            ids.add(entry)
    return frozenset(ids)


# -- splitting ---------------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    Kept in-house so that splits are identical on every platform and library
    version.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection sampling."""
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64."""
    rng = SplitMix64(seed)
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def make_split(
    instances: Sequence[QAInstance],
    exclusion_ids: Iterable[str] = (),
    seed: int = 0,
    n_train: int = 24,
    n_test: int = 12,
) -> CorpusSplit:
    excluded = frozenset(exclusion_ids)
    pool = [inst for inst in instances if inst.id not in excluded]
    needed = n_train + n_test
    if len(pool) < needed:
        raise InsufficientInstances(needed, len(pool))
    order = seeded_permutation(len(pool), seed)
    shuffled = [pool[i] for i in order]
    return CorpusSplit(
        train=tuple(shuffled[:n_train]),
        test=tuple(shuffled[n_train:needed]),
        seed=seed,
        exclusion_ids=excluded,
    )


# -- documents ---------------------------------------------------------------


def corpus_documents(instances: Iterable[QAInstance]) -> list[CorpusDocument]:
    """Distinct passages as documents, ordered by (title, content hash)."""
    candidates = []
    for inst in instances:
        for title, body in inst.passages:
            if not body.strip():
                continue
            digest = content_hash(body)
            candidates.append(CorpusDocument(f"doc-{digest[:16]}", title, body, digest))
    candidates.sort(key=lambda d: (d.title, d.content_hash))
    docs: list[CorpusDocument] = []
    seen: set[str] = set()
    for doc in candidates:
        if doc.content_hash in seen:
            continue
        seen.add(doc.content_hash)
        docs.append(doc)
    return docs
