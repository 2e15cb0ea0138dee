"""End-to-end trials and studies: build, answer, score, optimize, hold out."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

from filelock import FileLock, Timeout

from .corpus import CorpusSplit, QAInstance, corpus_documents, load_benchmark, make_split, read_exclusions
from .errors import ConfigError, GatewayError, StoreError
from .evaluation import METRICS, QuestionScore, ScoreReport, exact_match, llm_correctness, score_report, token_f1
from .gateway import Gateway, make_gateway
from .ingest import extract_graph_fragment, chunk_document, merge_fragments, summarize_chunk
from .retrieval import answer, retrieve
from .space import PipelineConfig, SearchSpace, baseline_config, default_search_space, override_space, validate_config
from .stores import TrialStores
from .tpe import Study, TPESettings, TrialRecord, best_trial, record, record_failure, running_max, suggest

log = logging.getLogger(__name__)

BACKENDS = ("mock", "replay", "live")


def bundled_dataset() -> Path:
    return Path(str(resources.files("graphtune") / "data" / "toy_hotpotqa.json"))


@dataclass
class StudySettings:
    dataset: Path = field(default_factory=bundled_dataset)
    adapter: str = "hotpotqa"
    benchmark: str | None = None
    exclusions: Path | None = None
    metric: str = "f1"
    n_trials: int = 50
    n_train: int = 24
    n_test: int = 12
    split_seed: int = 7
    optimizer_seed: int = 0
    bootstrap_seed: int = 0
    resamples: int = 1000
    backend: str = "mock"
    cache_dir: Path | None = None
    output_dir: Path = Path("runs/study")
    tpe: TPESettings = field(default_factory=TPESettings)
    space: SearchSpace = field(default_factory=default_search_space)
    baseline: PipelineConfig = field(default_factory=baseline_config)

    def __post_init__(self):
        self.dataset = Path(self.dataset)
        self.output_dir = Path(self.output_dir)
        if self.exclusions is not None:
            self.exclusions = Path(self.exclusions)
        if self.cache_dir is not None:
            self.cache_dir = Path(self.cache_dir)
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.benchmark is None:
            self.benchmark = self.dataset.stem

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": str(self.dataset),
            "adapter": self.adapter,
            "benchmark": self.benchmark,
            "exclusions": None if self.exclusions is None else str(self.exclusions),
            "metric": self.metric,
            "n_trials": self.n_trials,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "seeds": {"split": self.split_seed, "optimizer": self.optimizer_seed, "bootstrap": self.bootstrap_seed},
            "resamples": self.resamples,
            "backend": self.backend,
            "cache_dir": None if self.cache_dir is None else str(self.cache_dir),
            "output_dir": str(self.output_dir),
            "tpe": asdict(self.tpe),
            "space": self.space.to_dict(),
            "baseline": self.baseline.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StudySettings":
        seeds = data.get("seeds", {})
        return cls(
            dataset=Path(data["dataset"]),
            adapter=data["adapter"],
            benchmark=data.get("benchmark"),
            exclusions=data.get("exclusions"),
            metric=data["metric"],
            n_trials=data["n_trials"],
            n_train=data["n_train"],
            n_test=data["n_test"],
            split_seed=seeds.get("split", 7),
            optimizer_seed=seeds.get("optimizer", 0),
            bootstrap_seed=seeds.get("bootstrap", 0),
            resamples=data.get("resamples", 1000),
            backend=data["backend"],
            cache_dir=data.get("cache_dir"),
            output_dir=Path(data["output_dir"]),
            tpe=TPESettings(**data.get("tpe", {})),
            space=SearchSpace.from_dict(data["space"]),
            baseline=PipelineConfig.from_dict(data["baseline"]),
        )


# -- one trial ---------------------------------------------------------------


@dataclass
class Evaluation:
    """Scores for one config on one question set, with the answers given."""

    scores: list[QuestionScore]
    predictions: dict[str, str]
    build: dict[str, Any]

    @property
    def objective(self) -> float:
        return sum(q.value for q in self.scores) / len(self.scores) if self.scores else 0.0


def build_trial(
    config: PipelineConfig,
    instances: Sequence[QAInstance],
    gateway: Gateway,
    stores: TrialStores,
    questions: Sequence[QAInstance] = (),
) -> dict[str, Any]:
    """Reset the stores and rebuild the merged graph and indexes from ``instances``' passages.

    ``questions`` go into the metadata table; their passages are not indexed.
    """
    stores.reset_all()
    docs = corpus_documents(instances)
    chunks = [c for doc in docs for c in chunk_document(doc, config.chunk_size)]
    chunks.sort(key=lambda c: (c.doc_id, c.ordinal))

    fragments = [extract_graph_fragment(c, config.graph_prompt, gateway) for c in chunks]
    graph = merge_fragments(fragments)
    if config.task_getter == "with_summaries":
        for c in chunks:
            summary = summarize_chunk(c, gateway)
            if summary:
                graph.summaries[c.chunk_id] = summary
    graph.check_integrity(c.chunk_id for c in chunks)

    stores.load_graph(graph)
    stores.index_items("chunks", [(c.chunk_id, c.text) for c in chunks])
    stores.index_items("summaries", sorted(graph.summaries.items()))
    stores.index_items(
        "nodes",
        [(node_id, f"{n.name}. {n.description}") for node_id, n in sorted(graph.nodes.items())],
    )
    stores.add_qa_pairs({"instance_id": q.id, "question": q.question, "gold_answer": q.gold_answer} for q in questions)
    stores.freeze()
    return {
        "documents": [d.doc_id for d in docs],
        "chunks": len(chunks),
        "malformed_chunks": sum(1 for f in fragments if f.error),
        **stores.counts(),
    }


def score_answer(metric: str, inst: QAInstance, prediction: str, gateway: Gateway) -> tuple[float, str | None]:
    if metric == "em":
        return float(exact_match(prediction, inst.gold_answer)), None
    if metric == "f1":
        return token_f1(prediction, inst.gold_answer), None
    return llm_correctness(inst.question, prediction, inst.gold_answer, inst.aliases, gateway)


def answer_questions(
    config: PipelineConfig,
    questions: Sequence[QAInstance],
    metric: str,
    gateway: Gateway,
    stores: TrialStores,
    strategy: str | None = None,
) -> tuple[list[QuestionScore], dict[str, str]]:
    strategy = strategy or config.search_type
    scores, predictions = [], {}
    for inst in questions:
        note = None
        try:
            bundle = retrieve(inst.question, strategy, config.top_k, stores, gateway)
            pred = answer(inst.question, bundle, config.qa_prompt, gateway) if bundle.generate else bundle.rendered_context
        except GatewayError as exc:
            pred, note = "", f"answer failed: {exc}"
            value = 0.0
        else:
            value, note = score_answer(metric, inst, pred, gateway)
        predictions[inst.id] = pred
        scores.append(QuestionScore(inst.id, metric, value, note))
    return scores, predictions


def evaluate_config(
    config: PipelineConfig,
    build_from: Sequence[QAInstance],
    questions: Sequence[QAInstance],
    metric: str,
    gateway: Gateway,
    stores: TrialStores | None = None,
    strategy: str | None = None,
) -> Evaluation:
    """Build from ``build_from``'s passages, then answer and score ``questions``."""
    stores = stores if stores is not None else TrialStores(gateway)
    build = build_trial(config, build_from, gateway, stores, questions)
    scores, predictions = answer_questions(config, questions, metric, gateway, stores, strategy)
    return Evaluation(scores, predictions, build)


def run_trial(
    config: PipelineConfig,
    split: CorpusSplit,
    metric: str,
    gateway: Gateway,
    stores: TrialStores | None = None,
    space: SearchSpace | None = None,
    trial_index: int = 0,
) -> TrialRecord:
    """One full pipeline run on the training side of ``split``.

    Question-level failures score 0 with a note; a failure while building
    the graph or indexes marks the whole trial failed.
    """
    validate_config(config, space)
    started = time.time()
    try:
        ev = evaluate_config(config, split.train, split.train, metric, gateway, stores)
    except (GatewayError, StoreError) as exc:
        log.error("trial %d failed: %s", trial_index, exc)
        return TrialRecord(trial_index, config, None, (), started, time.time(), state="failed", note=str(exc))
    return TrialRecord(trial_index, config, ev.objective, tuple(ev.scores), started, time.time())


# -- studies -----------------------------------------------------------------


@dataclass
class PhaseResult:
    report: ScoreReport
    predictions: dict[str, str]

    def to_dict(self) -> dict[str, Any]:
        return {**self.report.to_dict(), "predictions": dict(sorted(self.predictions.items()))}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PhaseResult":
        return cls(ScoreReport.from_dict(data), dict(data.get("predictions", {})))


def relative_gain(optimized: float, baseline: float) -> float | None:
    """Percent increase over baseline; None (undefined) when the baseline is 0."""
    if baseline == 0:
        return None
    return 100.0 * (optimized - baseline) / baseline


@dataclass
class StudyReport:
    benchmark: str
    metric: str
    best_config: PipelineConfig
    best_trial_index: int
    train: PhaseResult
    holdout: PhaseResult
    baseline_train: PhaseResult
    baseline_holdout: PhaseResult
    running_max: list[tuple[int, float]]
    trial_objectives: list[float | None]
    questions: dict[str, dict[str, str]]
    settings: dict[str, Any]

    @property
    def gain_train(self) -> float | None:
        return relative_gain(self.train.report.mean, self.baseline_train.report.mean)

    @property
    def gain_holdout(self) -> float | None:
        return relative_gain(self.holdout.report.mean, self.baseline_holdout.report.mean)

    def to_dict(self) -> dict[str, Any]:
        return {
            "benchmark": self.benchmark,
            "metric": self.metric,
            "best_config": self.best_config.to_dict(),
            "best_trial_index": self.best_trial_index,
            "train": self.train.to_dict(),
            "holdout": self.holdout.to_dict(),
            "baseline_train": self.baseline_train.to_dict(),
            "baseline_holdout": self.baseline_holdout.to_dict(),
            "relative_gain_train": self.gain_train,
            "relative_gain_holdout": self.gain_holdout,
            "running_max": [list(p) for p in self.running_max],
            "trial_objectives": self.trial_objectives,
            "questions": self.questions,
            "settings": self.settings,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StudyReport":
        return cls(
            benchmark=data["benchmark"],
            metric=data["metric"],
            best_config=PipelineConfig.from_dict(data["best_config"]),
            best_trial_index=data["best_trial_index"],
            train=PhaseResult.from_dict(data["train"]),
            holdout=PhaseResult.from_dict(data["holdout"]),
            baseline_train=PhaseResult.from_dict(data["baseline_train"]),
            baseline_holdout=PhaseResult.from_dict(data["baseline_holdout"]),
            running_max=[(int(i), float(v)) for i, v in data["running_max"]],
            trial_objectives=list(data["trial_objectives"]),
            questions=data["questions"],
            settings=data["settings"],
        )


def load_split(settings: StudySettings) -> CorpusSplit:
    instances = load_benchmark(settings.dataset, settings.adapter)
    return make_split(instances, read_exclusions(settings.exclusions), settings.split_seed, settings.n_train, settings.n_test)


def _phase(ev: Evaluation, settings: StudySettings) -> PhaseResult:
    rep = score_report(ev.scores, settings.resamples, 0.95, settings.bootstrap_seed)
    return PhaseResult(rep, ev.predictions)


def _report_settings(settings: StudySettings) -> dict[str, Any]:
    # Only run-independent values, so reruns give byte-identical reports.
    d = settings.to_dict()
    d["dataset"] = settings.dataset.name
    d["exclusions"] = None if settings.exclusions is None else settings.exclusions.name
    for key in ("output_dir", "cache_dir"):
        d.pop(key)
    return d


def _open_study(settings: StudySettings, path: Path, resume: bool) -> Study:
    if path.exists() and resume:
        study = Study.load(path)
        if study.metric != settings.metric or study.seed != settings.optimizer_seed:
            raise ConfigError(f"{path} was recorded with different metric/seed; refusing to resume")
        if study.space != settings.space or study.settings != settings.tpe:
            raise ConfigError(f"{path} was recorded with a different search space or TPE settings")
        log.info("resuming study %s at trial %d", study.study_id, len(study.trials))
        return study
    if path.exists():
        raise ConfigError(f"{path} already exists; use resume or a fresh output directory")
    study_id = f"{settings.benchmark}-{settings.metric}-s{settings.optimizer_seed}"
    study = Study(settings.space, settings.metric, settings.optimizer_seed, settings.tpe, study_id, path=path)
    study.save()
    return study


def run_study(
    settings: StudySettings,
    resume: bool = True,
    gateway: Gateway | None = None,
    on_trial: Callable[[Study, TrialRecord], None] | None = None,
    emit: bool = True,
) -> StudyReport:
    """Baseline, ``n_trials`` of suggest/run/record, then the hold-out check.

    Picks up an existing ``study.jsonl`` in the output directory when
    ``resume`` is true. The hold-out graph is built from training passages
    only; test passages are never indexed.
    """
    split = load_split(settings)
    if gateway is None:
        gateway = make_gateway(settings.backend, settings.cache_dir)
    out = settings.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out / "study.lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise ConfigError(f"another process holds {out / 'study.lock'}") from None
    try:
        (out / "settings.json").write_text(json.dumps(settings.to_dict(), indent=2, sort_keys=True) + "\n")
        stores = TrialStores(gateway)
        validate_config(settings.baseline, None)
        base_train = evaluate_config(settings.baseline, split.train, split.train, settings.metric, gateway, stores)
        base_hold = evaluate_config(settings.baseline, split.train, split.test, settings.metric, gateway, stores)

        study = _open_study(settings, out / "study.jsonl", resume)
        while len(study.trials) < settings.n_trials:
            config = suggest(study)
            rec = run_trial(config, split, settings.metric, gateway, stores, settings.space, len(study.trials))
            if rec.state == "complete":
                record(study, config, rec.objective, rec.per_question, rec.started_at, rec.finished_at)
            else:
                record_failure(study, config, rec.note or "failed", rec.started_at, rec.finished_at)
            log.info("trial %d: %s objective=%s", rec.trial_index, rec.state, rec.objective)
            if on_trial is not None:
                on_trial(study, study.trials[-1])

        best = best_trial(study)
        best_train = evaluate_config(best.config, split.train, split.train, settings.metric, gateway, stores)
        best_hold = evaluate_config(best.config, split.train, split.test, settings.metric, gateway, stores)
        questions = {
            inst.id: {"question": inst.question, "gold": inst.gold_answer, "phase": phase}
            for phase, insts in (("train", split.train), ("holdout", split.test))
            for inst in insts
        }
        report = StudyReport(
            benchmark=settings.benchmark,
            metric=settings.metric,
            best_config=best.config,
            best_trial_index=best.trial_index,
            train=_phase(best_train, settings),
            holdout=_phase(best_hold, settings),
            baseline_train=_phase(base_train, settings),
            baseline_holdout=_phase(base_hold, settings),
            running_max=running_max(study),
            trial_objectives=[t.objective for t in study.trials],
            questions=questions,
            settings=_report_settings(settings),
        )
        if emit:
            from .report import emit_report

            emit_report(report, out)
        return report
    finally:
        lock.release()


def with_overrides(settings: StudySettings, **changes: Any) -> StudySettings:
    return replace(settings, **changes)


def settings_from_mapping(data: dict[str, Any], base_dir: Path | None = None) -> StudySettings:
    """Build settings from a parsed study file; relative paths resolve against ``base_dir``."""
    base_dir = base_dir or Path.cwd()
    known = {
        "dataset", "adapter", "benchmark", "exclusions", "metric", "n_trials", "n_train", "n_test",
        "resamples", "backend", "cache_dir", "output_dir", "seeds", "tpe", "space", "baseline",
    }
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown study-file keys: {', '.join(unknown)}")

    def path(key: str) -> Path | None:
        value = data.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    kwargs: dict[str, Any] = {}
    for key in ("adapter", "benchmark", "metric", "n_trials", "n_train", "n_test", "resamples", "backend"):
        if key in data:
            kwargs[key] = data[key]
    for key in ("dataset", "exclusions", "cache_dir", "output_dir"):
        if key in data:
            kwargs[key] = path(key)
    seeds = data.get("seeds", {})
    unknown_seeds = sorted(set(seeds) - {"split", "optimizer", "bootstrap"})
    if unknown_seeds:
        raise ConfigError(f"unknown seeds: {', '.join(unknown_seeds)}")
    for name in ("split", "optimizer", "bootstrap"):
        if name in seeds:
            kwargs[f"{name}_seed"] = int(seeds[name])
    if "tpe" in data:
        try:
            kwargs["tpe"] = TPESettings(**data["tpe"])
        except TypeError as exc:
            raise ConfigError(f"bad [tpe] table: {exc}") from None
    if "space" in data:
        kwargs["space"] = override_space(default_search_space(), data["space"])
    baseline = baseline_config()
    if "baseline" in data:
        baseline = baseline.replace(**data["baseline"])
    kwargs["baseline"] = baseline
    settings = StudySettings(**kwargs)
    validate_config(settings.baseline, None)
    return settings
