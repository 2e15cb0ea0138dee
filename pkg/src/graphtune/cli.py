"""Command line entry point.

    graphtune study run     --config study.toml [overrides]
    graphtune study resume  --out runs/x
    graphtune study report  --out runs/x
    graphtune trial run-one --config study.toml --param top_k=8 [--strategy ...]
    graphtune corpus inspect --dataset file.json --adapter hotpotqa

Exit codes: 0 ok, 2 config error, 3 dataset error, 4 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .corpus import ADAPTERS, corpus_documents, load_benchmark
from .errors import ConfigError, DatasetError, GatewayError
from .evaluation import METRICS, score_report
from .gateway import make_gateway
from .report import emit_report, load_report
from .retrieval import STRATEGIES
from .runner import (
    BACKENDS,
    StudySettings,
    evaluate_config,
    load_split,
    run_study,
    settings_from_mapping,
)
from .space import CONFIG_FIELDS, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_DATASET, EXIT_BACKEND = 0, 2, 3, 4

# flag -> (study-file key, type)
_FLAGS = {
    "dataset": ("dataset", str),
    "adapter": ("adapter", str),
    "benchmark": ("benchmark", str),
    "exclusions": ("exclusions", str),
    "metric": ("metric", str),
    "n_trials": ("n_trials", int),
    "n_train": ("n_train", int),
    "n_test": ("n_test", int),
    "resamples": ("resamples", int),
    "backend": ("backend", str),
    "cache_dir": ("cache_dir", str),
    "out": ("output_dir", str),
    "split_seed": ("seeds.split", int),
    "optimizer_seed": ("seeds.optimizer", int),
    "bootstrap_seed": ("seeds.bootstrap", int),
    "n_startup": ("tpe.n_startup", int),
    "gamma": ("tpe.gamma", float),
    "n_candidates": ("tpe.n_candidates", int),
    "prior_weight": ("tpe.prior_weight", float),
}


def _coerce(text: str) -> Any:
    """Parse an override value as a TOML scalar, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _set_dotted(data: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = data
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {key} is not a table")
    node[leaf] = value


def _add_study_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="study file (TOML)")
    p.add_argument("--dataset")
    p.add_argument("--adapter", choices=ADAPTERS)
    p.add_argument("--benchmark")
    p.add_argument("--exclusions")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--resamples", type=int)
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--cache-dir")
    p.add_argument("--out", help="output directory")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--optimizer-seed", type=int)
    p.add_argument("--bootstrap-seed", type=int)
    p.add_argument("--n-startup", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-candidates", type=int)
    p.add_argument("--prior-weight", type=float)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any study-file key, e.g. space.top_k.high=10 or baseline.top_k=3",
    )


def settings_from_args(args: argparse.Namespace) -> StudySettings:
    data: dict[str, Any] = {}
    base_dir = Path.cwd()
    if args.config is not None:
        try:
            data = tomllib.loads(args.config.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        base_dir = args.config.resolve().parent
    for flag, (key, _) in _FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            if key in ("dataset", "exclusions", "cache_dir", "output_dir"):
                value = str(Path(value).resolve())
            _set_dotted(data, key, value)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        _set_dotted(data, key.strip(), _coerce(value.strip()))
    return settings_from_mapping(data, base_dir)


# -- commands ----------------------------------------------------------------


def _print_summary(out: Path) -> None:
    print((out / "summary.csv").read_text(encoding="utf-8"), end="")
    print(f"report written to {out}")


def cmd_study_run(args: argparse.Namespace) -> int:
    settings = settings_from_args(args)
    run_study(settings, resume=False)
    _print_summary(settings.output_dir)
    return EXIT_OK


def cmd_study_resume(args: argparse.Namespace) -> int:
    path = Path(args.out) / "settings.json"
    if not path.exists():
        raise ConfigError(f"{path} not found; nothing to resume")
    settings = StudySettings.from_dict(json.loads(path.read_text(encoding="utf-8")))
    if args.n_trials is not None:
        settings.n_trials = args.n_trials
    run_study(settings, resume=True)
    _print_summary(settings.output_dir)
    return EXIT_OK


def cmd_study_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if not (out / "report.json").exists():
        raise ConfigError(f"{out / 'report.json'} not found")
    emit_report(load_report(out), out)
    _print_summary(out)
    return EXIT_OK


def cmd_trial_run_one(args: argparse.Namespace) -> int:
    settings = settings_from_args(args)
    config = settings.baseline
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep or key not in CONFIG_FIELDS:
            raise ConfigError(f"--param expects one of {CONFIG_FIELDS} as KEY=VALUE, got {item!r}")
        config = config.replace(**{key: _coerce(value)})
    validate_config(config, settings.space)
    split = load_split(settings)
    gateway = make_gateway(settings.backend, settings.cache_dir)
    questions = split.test if args.holdout else split.train
    ev = evaluate_config(config, split.train, questions, settings.metric, gateway, strategy=args.strategy)
    rep = score_report(ev.scores, settings.resamples, 0.95, settings.bootstrap_seed)
    if args.json:
        print(json.dumps({"config": config.to_dict(), "strategy": args.strategy or config.search_type,
                          "score": rep.to_dict(), "predictions": ev.predictions}, indent=2, sort_keys=True))
    else:
        print(json.dumps(config.to_dict(), sort_keys=True))
        print(f"{settings.metric} = {rep.mean:.3f}  (95% CI {rep.ci_low:.3f} to {rep.ci_high:.3f}, n={len(ev.scores)})")
    return EXIT_OK


def cmd_corpus_inspect(args: argparse.Namespace) -> int:
    instances = load_benchmark(args.dataset, args.adapter)
    docs = corpus_documents(instances)
    print(f"{len(instances)} instances, {len(docs)} distinct passages")
    for inst in instances[: args.limit]:
        print(f"- {inst.id}: {inst.question}  -> {inst.gold_answer}  ({len(inst.passages)} passages)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphtune", description="Tune a graph RAG pipeline with TPE.")
    parser.add_argument("-v", "--verbose", action="store_true")
    groups = parser.add_subparsers(dest="group", required=True)

    study = groups.add_parser("study", help="run, resume or re-render a study").add_subparsers(dest="verb", required=True)
    p = study.add_parser("run", help="start a new study")
    _add_study_flags(p)
    p.set_defaults(func=cmd_study_run)
    p = study.add_parser("resume", help="continue an interrupted study")
    p.add_argument("--out", required=True)
    p.add_argument("--n-trials", type=int)
    p.set_defaults(func=cmd_study_resume)
    p = study.add_parser("report", help="re-render report files from report.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study_report)

    trial = groups.add_parser("trial", help="single trials").add_subparsers(dest="verb", required=True)
    p = trial.add_parser("run-one", help="run one configuration")
    _add_study_flags(p)
    p.add_argument("--param", action="append", default=[], metavar="FIELD=VALUE",
                   help="change one field of the baseline configuration")
    p.add_argument("--strategy", choices=STRATEGIES, help="retrieval strategy, including ones outside the search space")
    p.add_argument("--holdout", action="store_true", help="answer the test questions instead of the training ones")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_trial_run_one)

    corpus = groups.add_parser("corpus", help="dataset tools").add_subparsers(dest="verb", required=True)
    p = corpus.add_parser("inspect", help="summarize a benchmark file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--adapter", choices=ADAPTERS, default="hotpotqa")
    p.add_argument("--limit", type=int, default=5)
    p.set_defaults(func=cmd_corpus_inspect)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except GatewayError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
