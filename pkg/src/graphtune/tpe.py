"""Univariate Tree-structured Parzen Estimator over a mixed search space.

The search space has no conditional structure, so the "tree" is flat: each
dimension gets its own pair of Parzen densities, l(x) from the best
``ceil(gamma * n)`` completed trials and g(x) from the rest, and the value
maximizing l(x)/g(x) among ``n_candidates`` draws from l is proposed.
Objectives are maximized.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, NoCompleteTrials, OutOfDomain, StudyClosed
from .evaluation import QuestionScore
from .space import Categorical, IntegerRange, PipelineConfig, SearchSpace, validate_config

STUDY_FORMAT = "graphtune-study"
STUDY_VERSION = 1


@dataclass(frozen=True)
class TPESettings:
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    prior_weight: float = 1.0

    def __post_init__(self):
        if self.n_startup < 0 or self.n_candidates < 1:
            raise ConfigError("n_startup must be >= 0 and n_candidates >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.prior_weight <= 0:
            raise ConfigError("prior_weight must be positive")


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    config: PipelineConfig
    objective: float | None
    per_question: tuple[QuestionScore, ...] = ()
    started_at: float = 0.0
    finished_at: float = 0.0
    state: str = "complete"
    note: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "kind": "trial",
            "index": self.trial_index,
            "config": self.config.to_dict(),
            "objective": self.objective,
            "state": self.state,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "per_question": [q.to_dict() for q in self.per_question],
        }
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrialRecord":
        return cls(
            trial_index=int(data["index"]),
            config=PipelineConfig.from_dict(data["config"]),
            objective=None if data["objective"] is None else float(data["objective"]),
            per_question=tuple(QuestionScore.from_dict(q) for q in data.get("per_question", ())),
            started_at=float(data.get("started_at", 0.0)),
            finished_at=float(data.get("finished_at", 0.0)),
            state=data["state"],
            note=data.get("note"),
        )


@dataclass
class Study:
    space: SearchSpace
    metric: str = "f1"
    seed: int = 0
    settings: TPESettings = field(default_factory=TPESettings)
    study_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    trials: list[TrialRecord] = field(default_factory=list)
    path: Path | None = None
    closed: bool = False

    @property
    def complete_trials(self) -> list[TrialRecord]:
        return [t for t in self.trials if t.state == "complete"]

    def header(self) -> dict[str, Any]:
        return {
            "kind": "header",
            "format": STUDY_FORMAT,
            "version": STUDY_VERSION,
            "study_id": self.study_id,
            "metric": self.metric,
            "seed": self.seed,
            "space": self.space.to_dict(),
            "settings": asdict(self.settings),
        }

    def save(self, path: str | Path | None = None) -> None:
        """Rewrite the whole trial log (header plus one line per trial)."""
        path = Path(path or self.path)
        lines = [_dumps(self.header())] + [_dumps(t.to_dict()) for t in self.trials]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self.path = path

    @classmethod
    def load(cls, path: str | Path) -> "Study":
        path = Path(path)
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise ConfigError(f"{path} is empty")
        head = json.loads(lines[0])
        if head.get("format") != STUDY_FORMAT or head.get("version") != STUDY_VERSION:
            raise ConfigError(f"{path} is not a version-{STUDY_VERSION} study log")
        study = cls(
            space=SearchSpace.from_dict(head["space"]),
            metric=head["metric"],
            seed=int(head["seed"]),
            settings=TPESettings(**head["settings"]),
            study_id=head["study_id"],
            path=path,
        )
        for ln in lines[1:]:
            study.trials.append(TrialRecord.from_dict(json.loads(ln)))
        for i, t in enumerate(study.trials):
            if t.trial_index != i:
                raise ConfigError(f"{path}: trial indices are not dense (found {t.trial_index} at {i})")
        return study


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


# -- densities ---------------------------------------------------------------


def categorical_density(group: Sequence[Any], domain: Sequence[Any], prior_weight: float = 1.0) -> np.ndarray:
    """p(c) = (prior_weight + count(c)) / (prior_weight * |domain| + |group|)."""
    if not domain:
        raise ValueError("domain must be non-empty")
    index = {c: i for i, c in enumerate(domain)}
    counts = np.zeros(len(domain))
    for value in group:
        counts[index[value]] += 1
    return (prior_weight + counts) / (prior_weight * len(domain) + len(group))


def numeric_density(
    group: Sequence[int],
    low: int,
    high: int,
    step: int = 1,
    prior_weight: float = 1.0,
) -> np.ndarray:
    """Probability mass on each grid point ``low, low + step, ..., high``.

    Mixture of a uniform prior and one Gaussian kernel per observation, all
    truncated to ``[low - step/2, high + step/2]`` and integrated over the
    grid cell around each point. Kernels share the bandwidth
    ``max(step, (high - low) / sqrt(n + 1))`` and weight 1; the prior has
    weight ``prior_weight``.
    """
    if low > high:
        raise ValueError("low must be <= high")
    grid = np.arange(low, high + 1, step, dtype=float)
    uniform = np.full(grid.size, 1.0 / grid.size)
    obs = np.asarray(group, dtype=float)
    if obs.size == 0:
        return uniform
    sigma = max(float(step), (high - low) / math.sqrt(obs.size + 1))
    lo_edge, hi_edge = low - step / 2.0, high + step / 2.0
    left = (grid - step / 2.0)[None, :]
    right = (grid + step / 2.0)[None, :]
    mu = obs[:, None]
    cells = ndtr((right - mu) / sigma) - ndtr((left - mu) / sigma)
    total = ndtr((hi_edge - mu) / sigma) - ndtr((lo_edge - mu) / sigma)
    kernels = cells / total
    masses = (prior_weight * uniform + kernels.sum(axis=0)) / (prior_weight + obs.size)
    return masses / masses.sum()


# -- suggest / record --------------------------------------------------------


def _rng(study: Study) -> np.random.Generator:
    # Keyed on history length so a resumed study replays the same draws.
    return np.random.default_rng([study.seed, len(study.trials)])


def split_good_bad(trials: Sequence[TrialRecord], gamma: float) -> tuple[list[TrialRecord], list[TrialRecord]]:
    """Top ``ceil(gamma * n)`` by objective (ties: lower index first) and the rest."""
    ranked = sorted(trials, key=lambda t: (-t.objective, t.trial_index))
    n_good = math.ceil(gamma * len(ranked))
    return ranked[:n_good], ranked[n_good:]


def random_config(space: SearchSpace, rng: np.random.Generator) -> PipelineConfig:
    values: dict[str, Any] = {}
    for dim in space:
        if isinstance(dim, Categorical):
            values[dim.name] = dim.choices[int(rng.integers(len(dim.choices)))]
        else:
            grid = dim.grid()
            values[dim.name] = grid[int(rng.integers(len(grid)))]
    return PipelineConfig.from_dict(values)


def _pick(l: np.ndarray, g: np.ndarray, n_candidates: int, rng: np.random.Generator) -> int:
    draws = rng.choice(l.size, size=n_candidates, p=l)
    ratio = np.log(l[draws]) - np.log(g[draws])
    return int(draws[int(np.argmax(ratio))])


def suggest(study: Study) -> PipelineConfig:
    if study.closed:
        raise StudyClosed(f"study {study.study_id} is closed")
    rng = _rng(study)
    done = study.complete_trials
    s = study.settings
    if len(done) < s.n_startup:
        return validate_config(random_config(study.space, rng), study.space)

    good, bad = split_good_bad(done, s.gamma)
    values: dict[str, Any] = {}
    for dim in study.space:
        good_vals = [getattr(t.config, dim.name) for t in good]
        bad_vals = [getattr(t.config, dim.name) for t in bad]
        if isinstance(dim, Categorical):
            # Values recorded under an older, wider space are ignored.
            good_vals = [v for v in good_vals if v in dim.choices]
            bad_vals = [v for v in bad_vals if v in dim.choices]
            l = categorical_density(good_vals, dim.choices, s.prior_weight)
            g = categorical_density(bad_vals, dim.choices, s.prior_weight)
            values[dim.name] = dim.choices[_pick(l, g, s.n_candidates, rng)]
        else:
            good_vals = [v for v in good_vals if dim.contains(v)]
            bad_vals = [v for v in bad_vals if dim.contains(v)]
            l = numeric_density(good_vals, dim.low, dim.high, dim.step, s.prior_weight)
            g = numeric_density(bad_vals, dim.low, dim.high, dim.step, s.prior_weight)
            values[dim.name] = dim.grid()[_pick(l, g, s.n_candidates, rng)]
    return validate_config(PipelineConfig.from_dict(values), study.space)


def _append(study: Study, rec: TrialRecord) -> Study:
    study.trials.append(rec)
    if study.path is not None:
        if not study.path.exists():
            study.save()
        else:
            with study.path.open("a", encoding="utf-8") as fh:
                fh.write(_dumps(rec.to_dict()) + "\n")
    return study


def record(
    study: Study,
    config: PipelineConfig,
    objective: float,
    per_question: Sequence[QuestionScore] = (),
    started_at: float = 0.0,
    finished_at: float = 0.0,
) -> Study:
    if study.closed:
        raise StudyClosed(f"study {study.study_id} is closed")
    validate_config(config, study.space)
    if not (isinstance(objective, (int, float)) and 0.0 <= objective <= 1.0):
        raise OutOfDomain("objective", objective, (0.0, 1.0))
    rec = TrialRecord(len(study.trials), config, float(objective), tuple(per_question), started_at, finished_at)
    return _append(study, rec)


def record_failure(
    study: Study,
    config: PipelineConfig,
    note: str,
    started_at: float = 0.0,
    finished_at: float = 0.0,
) -> Study:
    if study.closed:
        raise StudyClosed(f"study {study.study_id} is closed")
    rec = TrialRecord(len(study.trials), config, None, (), started_at, finished_at, state="failed", note=note)
    return _append(study, rec)


def best_trial(study: Study) -> TrialRecord:
    done = study.complete_trials
    if not done:
        raise NoCompleteTrials(f"study {study.study_id} has no complete trials")
    return min(done, key=lambda t: (-t.objective, t.trial_index))


def running_max(study: Study) -> list[tuple[int, float]]:
    """Best objective so far after each trial; failed trials repeat the previous value.

    Failed trials before the first completed one are left out.
    """
    series: list[tuple[int, float]] = []
    best: float | None = None
    for t in study.trials:
        if t.state == "complete" and (best is None or t.objective > best):
            best = t.objective
        if best is not None:
            series.append((t.trial_index, best))
    return series


# -- generic loop ------------------------------------------------------------


def optimize(
    objective: Callable[[PipelineConfig], float],
    space: SearchSpace,
    n_trials: int,
    seed: int = 0,
    sampler: str = "tpe",
    settings: TPESettings | None = None,
) -> Study:
    """Run ``n_trials`` sequential evaluations with TPE or uniform random search."""
    study = Study(space=space, seed=seed, settings=settings or TPESettings(), study_id=f"{sampler}-{seed}")
    for _ in range(n_trials):
        if sampler == "tpe":
            config = suggest(study)
        elif sampler == "random":
            config = random_config(space, _rng(study))
        else:
            raise ValueError(f"unknown sampler {sampler!r}")
        record(study, config, objective(config))
    return study


def triangle(x: float, peak: float, low: float, high: float) -> float:
    if x <= peak:
        return (x - low) / (peak - low) if peak > low else 1.0
    return (high - x) / (high - peak) if high > peak else 1.0


def separable_objective(config: PipelineConfig) -> float:
    """Synthetic benchmark: 0.8 for graph retrieval plus 0.2 * triangle(top_k, peak 10).

    The global optimum 1.0 is reached only at graph_completion with top_k=10.
    """
    return 0.8 * (config.search_type == "graph_completion") + 0.2 * triangle(config.top_k, 10, 1, 20)
