"""Deterministic stand-in for the language model and embedder.

The rules are simple but give the optimizer a real signal: retrieval depth,
chunking and graph shape change what the answerer can see, and the three QA
templates change answer style (terse span, one sentence, conversational), so
prompt choice moves EM and F1 the way answer-style mismatch does with real
models.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache

import numpy as np

from .evaluation import token_f1
from .gateway import CompletionRequest, GatewayError
from .text import STOPWORDS, content_words, split_sentences

EMBED_DIM = 256
ABSTAIN = "unknown"

# qa template stem -> answer style; unknown stems answer conversationally.
QA_STYLES = {"default": "conversational", "concise": "terse", "direct": "sentence"}
# graph template stem -> relation rule.
GRAPH_MODES = {"default": "adjacent", "incremental": "all_pairs", "strict": "keyword_only"}

PREDICATES = (
    ("capital of", "capital_of"),
    ("capital is", "has_capital"),
    ("born in", "born_in"),
    ("founded by", "founded_by"),
    ("founded", "founded"),
    ("located in", "located_in"),
    ("works for", "works_for"),
    ("married", "married_to"),
    ("wrote", "wrote"),
    ("directed", "directed"),
    ("member of", "member_of"),
    ("flows through", "flows_through"),
    ("headquartered in", "headquartered_in"),
    ("studied at", "studied_at"),
    ("plays for", "plays_for"),
)
DEFAULT_PREDICATE = "related_to"

_WORD = re.compile(r"\w+")


# -- embeddings --------------------------------------------------------------


@lru_cache(maxsize=65536)
def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def hashed_embedding(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Bag of content-word unigrams hashed into ``dim`` buckets, L2-normalised."""
    vec = np.zeros(dim)
    for word in content_words(text):
        vec[_bucket(word, dim)] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


# -- entities ----------------------------------------------------------------


def entity_spans(sentence: str) -> list[str]:
    """Maximal runs of capitalised words or numbers, in order of appearance.

    Runs break on anything other than a single space between words, and a
    capitalised stopword ("The", "In") never starts or joins a run.
    """
    spans: list[str] = []
    start = end = None
    for m in _WORD.finditer(sentence):
        word = m.group(0)
        is_entity = (word[0].isupper() and word.lower() not in STOPWORDS) or word.isdigit()
        if is_entity and end is not None and sentence[end : m.start()] == " ":
            end = m.end()
            continue
        if start is not None:
            spans.append(sentence[start:end])
            start = end = None
        if is_entity:
            start, end = m.start(), m.end()
    if start is not None:
        spans.append(sentence[start:end])
    return list(dict.fromkeys(spans))


def _predicate(between: str) -> str | None:
    low = " ".join(between.lower().split())
    for phrase, name in PREDICATES:
        if phrase in low:
            return name
    return None


def _clean(field: str) -> str:
    return " ".join(field.replace("|", "/").split())


def mock_extract(text: str, mode: str = "adjacent") -> str:
    entities: dict[str, tuple[str, str]] = {}
    relations: list[tuple[str, str, str]] = []
    for sentence in split_sentences(text):
        spans = entity_spans(sentence)
        for span in spans:
            if span not in entities:
                etype = "Number" if span.isdigit() else "Entity"
                entities[span] = (etype, sentence)
        if mode == "all_pairs":
            pairs = [(a, b) for i, a in enumerate(spans) for b in spans[i + 1 :]]
        else:
            pairs = list(zip(spans, spans[1:]))
        for a, b in pairs:
            ia, ib = sentence.find(a), sentence.find(b)
            pred = _predicate(sentence[ia + len(a) : ib]) if 0 <= ia < ib else None
            if pred is None:
                if mode == "keyword_only":
                    continue
                pred = DEFAULT_PREDICATE
            relations.append((a, pred, b))
    lines = ["```"]
    for name, (etype, desc) in entities.items():
        lines.append(f"ENTITY {_clean(name)} | {etype} | {_clean(desc)}")
    for s, p, o in dict.fromkeys(relations):
        lines.append(f"REL {_clean(s)} | {p} | {_clean(o)}")
    lines.append("```")
    return "\n".join(lines)


def mock_summary(text: str) -> str:
    sentences = split_sentences(text)
    return sentences[0] if sentences else ""


# -- answering ---------------------------------------------------------------


def _candidates(unit: str, known: set[str]) -> list[str]:
    out = []
    for span in entity_spans(unit):
        words = content_words(span)
        if words and not all(w in known for w in words):
            out.append(span)
    return out


def _fallback_span(unit: str, known: set[str]) -> str | None:
    for word in content_words(unit):
        if word not in known:
            return word
    return None


def _style(span: str, sentence: str, style: str) -> str:
    sentence = sentence.lstrip("| ").strip()
    if style == "terse":
        return span
    if style == "sentence":
        return sentence
    return f"Based on the context, it is {span}. {sentence}"


def mock_answer(question: str, context: str, style: str = "conversational") -> str:
    """Pick the context sentence overlapping the question most, then answer.

    The answer is the first entity in that sentence not already named in the
    question. When the sentence leaves question words unexplained, a second
    hop looks for another sentence that mentions the candidate and covers
    those words, and answers from it instead.
    """
    units = split_sentences(context)
    q = set(content_words(question))
    if not units or not q:
        return ABSTAIN
    unit_words = [set(content_words(u)) for u in units]
    overlaps = [len(q & w) for w in unit_words]
    best = max(range(len(units)), key=lambda i: (overlaps[i], -i))
    if overlaps[best] == 0:
        return ABSTAIN

    first = units[best]
    cands = _candidates(first, q)
    residual = q - unit_words[best]
    if residual:
        for cand in cands:
            cand_words = set(content_words(cand))
            hops = [
                i
                for i, u in enumerate(units)
                if i != best and cand in u and residual & unit_words[i]
            ]
            if not hops:
                continue
            hop = max(hops, key=lambda i: (len(residual & unit_words[i]), -i))
            second = _candidates(units[hop], q | cand_words)
            if second:
                return _style(second[0], units[hop], style)
    if cands:
        return _style(cands[0], first, style)
    word = _fallback_span(first, q)
    return _style(word, first, style) if word else ABSTAIN


def mock_grade(prediction: str, gold: str, aliases: list[str]) -> str:
    """Threshold the best token F1 against gold or aliases into {0, 0.5, 1}."""
    f1 = max(token_f1(prediction, ref) for ref in [gold, *aliases])
    score = 1.0 if f1 >= 0.8 else 0.5 if f1 >= 0.1 else 0.0
    return f"{score:.1f} (token overlap {f1:.2f})"


class MockBackend:
    model = "mock"

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def complete(self, role: str, request: CompletionRequest, rendered: str) -> str:
        stem = request.template_id.rsplit("/", 1)[-1]
        v = request.variables
        if role == "graph_extraction":
            return mock_extract(v["text"], GRAPH_MODES.get(stem, "adjacent"))
        if role == "summarization":
            return mock_summary(v["text"])
        if role == "qa_system":
            return mock_answer(v["question"], v["context"], QA_STYLES.get(stem, "conversational"))
        if role == "grading":
            aliases = [] if v.get("aliases", "none") == "none" else v["aliases"].split("; ")
            return mock_grade(v["prediction"], v["gold"], aliases)
        raise GatewayError(f"mock backend has no rule for role {role!r}", kind="fatal")

    def embed(self, text: str) -> np.ndarray:
        return hashed_embedding(text, self.dim)
