from __future__ import annotations

import json

import pytest

from graphtune.cli import EXIT_BACKEND, EXIT_CONFIG, EXIT_DATASET, EXIT_OK, _coerce, build_parser, main, settings_from_args
from graphtune.runner import bundled_dataset


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coerce():
    assert _coerce("3") == 3 and _coerce("0.5") == 0.5 and _coerce("true") is True
    assert _coerce('"x"') == "x" and _coerce("graph_completion") == "graph_completion"


def test_flags_and_set_overrides(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('metric = "em"\nn_trials = 9\n[space.top_k]\nhigh = 12\n')
    args = build_parser().parse_args(
        ["study", "run", "--config", str(cfg), "--n-trials", "4", "--gamma", "0.5",
         "--set", "baseline.top_k=3", "--set", "seeds.split=11", "--out", str(tmp_path / "o")]
    )
    s = settings_from_args(args)
    assert s.metric == "em" and s.n_trials == 4 and s.tpe.gamma == 0.5
    assert s.baseline.top_k == 3 and s.split_seed == 11
    assert s.space["top_k"].bounds == (1, 12) and s.output_dir == tmp_path / "o"


def test_study_run_resume_report(capsys, tmp_path):
    out = tmp_path / "run"
    code, text, _ = run(capsys, "study", "run", "--n-trials", "2", "--resamples", "100", "--out", str(out))
    assert code == EXIT_OK and text.startswith("benchmark,metric,phase")
    first = (out / "report.json").read_bytes()
    code, _, _ = run(capsys, "study", "resume", "--out", str(out))
    assert code == EXIT_OK and (out / "report.json").read_bytes() == first
    (out / "summary.csv").unlink()
    code, _, _ = run(capsys, "study", "report", "--out", str(out))
    assert code == EXIT_OK and (out / "summary.csv").exists()
    # a second fresh run into the same directory is refused
    code, _, err = run(capsys, "study", "run", "--n-trials", "2", "--out", str(out))
    assert code == EXIT_CONFIG and "already exists" in err


def test_run_one(capsys):
    code, text, _ = run(capsys, "trial", "run-one", "--param", "top_k=8", "--param", "search_type=graph_completion",
                        "--resamples", "100", "--json")
    assert code == EXIT_OK
    data = json.loads(text)
    assert data["config"]["top_k"] == 8 and data["strategy"] == "graph_completion"
    assert 0.0 <= data["score"]["mean"] <= 1.0 and len(data["predictions"]) == 24

    code, text, _ = run(capsys, "trial", "run-one", "--strategy", "chunk_direct", "--holdout", "--resamples", "50")
    assert code == EXIT_OK and "n=12" in text


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["trial", "run-one", "--param", "top_k=99"], EXIT_CONFIG),
        (["trial", "run-one", "--param", "colour=red"], EXIT_CONFIG),
        (["study", "run", "--set", "n_trails=3"], EXIT_CONFIG),
        (["study", "run", "--set", "novalue"], EXIT_CONFIG),
        (["study", "resume", "--out", "/nonexistent/run"], EXIT_CONFIG),
        (["study", "report", "--out", "/nonexistent/run"], EXIT_CONFIG),
        (["corpus", "inspect", "--dataset", "/nonexistent/file.json"], EXIT_DATASET),
        (["trial", "run-one", "--backend", "live"], EXIT_BACKEND),
    ],
)
def test_exit_codes(capsys, monkeypatch, argv, expected):
    monkeypatch.delenv("GT_LLM_MODEL", raising=False)
    code, _, err = run(capsys, *argv)
    assert code == expected, err
    assert err


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "broken.toml"
    cfg.write_text("metric = \n")
    code, _, err = run(capsys, "study", "run", "--config", str(cfg))
    assert code == EXIT_CONFIG and "broken.toml" in err


def test_empty_dataset_is_dataset_error(capsys, tmp_path):
    data = tmp_path / "empty.json"
    data.write_text("[]")
    code, _, _ = run(capsys, "study", "run", "--dataset", str(data), "--out", str(tmp_path / "o"))
    assert code == EXIT_DATASET


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        main(["study", "run", "--metric", "bleu"])
    assert err.value.code == 2


def test_corpus_inspect(capsys):
    code, text, _ = run(capsys, "corpus", "inspect", "--dataset", str(bundled_dataset()), "--limit", "2")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0].startswith("36 instances") and len(lines) == 3


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for name, backend in (("toy_study.toml", "mock"), ("live_study.toml", "replay")):
        s = settings_from_args(build_parser().parse_args(["study", "run", "--config", str(root / name)]))
        assert s.backend == backend and s.n_trials == 50
