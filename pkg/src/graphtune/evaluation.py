"""Answer scoring (EM, token F1, model-graded correctness) and aggregation."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import EmptyScoreList, GatewayError, MixedMetrics, TooFewValues

if TYPE_CHECKING:
    from .gateway import Gateway

METRICS = ("em", "f1", "correctness")
_ARTICLES = frozenset({"a", "an", "the"})


@dataclass(frozen=True)
class QuestionScore:
    instance_id: str
    metric: str
    value: float
    error_note: str | None = None

    def to_dict(self) -> dict:
        out = {"instance_id": self.instance_id, "metric": self.metric, "value": self.value}
        if self.error_note:
            out["error_note"] = self.error_note
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "QuestionScore":
        return cls(data["instance_id"], data["metric"], float(data["value"]), data.get("error_note"))


@dataclass(frozen=True)
class ScoreReport:
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    resamples: int
    per_question: tuple[QuestionScore, ...]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "resamples": self.resamples,
            "per_question": [q.to_dict() for q in self.per_question],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreReport":
        return cls(
            data["metric"],
            float(data["mean"]),
            float(data["ci_low"]),
            float(data["ci_high"]),
            int(data["resamples"]),
            tuple(QuestionScore.from_dict(q) for q in data["per_question"]),
        )


def _strip_punct(text: str) -> str:
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def normalize_answer(text: str) -> str:
    """Lower-case, drop punctuation, drop the articles a/an/the, collapse whitespace."""
    text = _strip_punct(text.casefold())
    return " ".join(tok for tok in text.split() if tok not in _ARTICLES)


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def token_f1(pred: str, gold: str) -> float:
    p = normalize_answer(pred).split()
    g = normalize_answer(gold).split()
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    overlap = sum((Counter(p) & Counter(g)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(g)
    return 2 * precision * recall / (precision + recall)


_DECIMAL = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")


def parse_grade(text: str) -> float | None:
    """First decimal literal in ``text``, clamped to [0, 1]; None if absent."""
    m = _DECIMAL.search(text)
    if m is None:
        return None
    return min(1.0, max(0.0, float(m.group(0))))


def llm_correctness(
    question: str,
    pred: str,
    gold: str,
    aliases: Sequence[str],
    gateway: "Gateway",
    template: str = "grading/default",
) -> tuple[float, str | None]:
    """Model-graded correctness in [0, 1] and an optional error note.

    Never raises on model failure: a failed or unparseable grading scores 0.
    """
    from .gateway import CompletionRequest

    request = CompletionRequest(
        template,
        {
            "question": question,
            "prediction": pred,
            "gold": gold,
            "aliases": "; ".join(aliases) if aliases else "none",
        },
    )
    for _ in range(2):
        try:
            reply = gateway.complete(request)
        except GatewayError as exc:
            return 0.0, f"grader error: {exc}"
        score = parse_grade(reply)
        if score is not None:
            return score, None
    return 0.0, "grader reply had no score"


def aggregate(per_question: Sequence[QuestionScore]) -> float:
    if not per_question:
        raise EmptyScoreList("cannot aggregate an empty score list")
    metrics = {q.metric for q in per_question}
    if len(metrics) > 1:
        raise MixedMetrics(f"scores mix metrics {sorted(metrics)}")
    return float(np.mean([q.value for q in per_question]))


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean.

    Draws ``resamples`` resamples with replacement (numpy PCG64 seeded with
    ``seed``) and takes linearly interpolated percentiles of their means.
    """
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        raise TooFewValues(f"bootstrap needs at least 2 values, got {data.size}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if np.all(data == data[0]):
        # resampled means of a constant would carry summation round-off
        return float(data[0]), float(data[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(resamples, data.size))
    means = data[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(means, [100 * alpha, 100 * (1 - alpha)], method="linear")
    return float(low), float(high)


def score_report(
    per_question: Sequence[QuestionScore],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> ScoreReport:
    mean = aggregate(per_question)
    if len(per_question) >= 2:
        low, high = bootstrap_ci([q.value for q in per_question], resamples, level, seed)
    else:
        low = high = mean
    # Resample means and the sample mean can differ in the last ulp.
    low, high = min(low, mean), max(high, mean)
    return ScoreReport(per_question[0].metric, mean, low, high, resamples, tuple(per_question))
