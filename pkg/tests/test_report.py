from __future__ import annotations

import csv
import io
import json
import re

from conftest import GOLDEN_DIR

from graphtune.report import RUNNING_MAX_COLUMNS, SUMMARY_COLUMNS, fmt_gain, load_report, summary_csv
from graphtune.runner import StudySettings, run_study


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_summary_matches_golden(golden_run):
    _, out = golden_run
    assert (out / "summary.csv").read_bytes() == (GOLDEN_DIR / "summary.csv").read_bytes()


def test_running_max_matches_golden(golden_run):
    _, out = golden_run
    assert (out / "running_max.csv").read_bytes() == (GOLDEN_DIR / "running_max.csv").read_bytes()


def test_summary_shape(golden_run):
    report, out = golden_run
    text = (out / "summary.csv").read_text()
    assert text.splitlines()[0].split(",") == list(SUMMARY_COLUMNS)
    table = rows(text)
    assert [(r["metric"], r["phase"]) for r in table] == [("f1", "train"), ("f1", "holdout")]
    for r in table:
        for prefix in ("baseline", "optimized"):
            assert float(r[f"{prefix}_ci_low"]) <= float(r[prefix]) <= float(r[f"{prefix}_ci_high"])
    assert table[0]["relative_gain_pct"] == fmt_gain(report.gain_train)


def test_running_max_shape(golden_run):
    report, out = golden_run
    table = rows((out / "running_max.csv").read_text())
    assert tuple(table[0]) == RUNNING_MAX_COLUMNS
    assert [int(r["trial"]) for r in table] == list(range(20))
    best = [float(r["running_max"]) for r in table]
    assert best == sorted(best)
    assert best[-1] == max(float(r["objective"]) for r in table)


def test_zero_baseline_renders_dashes(tmp_path):
    # The untuned baseline never gets an exact match on the toy benchmark.
    report = run_study(StudySettings(metric="em", n_trials=1, resamples=100, output_dir=tmp_path))
    assert report.baseline_train.report.mean == 0.0
    table = rows(summary_csv(report))
    assert table[0]["relative_gain_pct"] == "--"
    assert json.loads((tmp_path / "report.json").read_text())["relative_gain_train"] is None


def test_dashboard_is_self_contained(golden_run):
    _, out = golden_run
    page = (out / "dashboard.html").read_text()
    assert "<svg" in page and "<table>" in page
    assert not re.search(r"""(src|href)\s*=""", page, re.I)
    assert not re.search(r"https?://|//[a-z0-9.-]+\.[a-z]{2,}/", page, re.I)
    assert "@import" not in page and "url(" not in page
    assert page.count("<tr class=") == 36


def test_report_round_trip(golden_run):
    report, out = golden_run
    again = load_report(out)
    assert again.to_dict() == json.loads(json.dumps(report.to_dict()))
    assert summary_csv(again) == (out / "summary.csv").read_text()


def test_fmt_gain():
    assert fmt_gain(None) == "--"
    assert fmt_gain(792.64) == "792.6"
    assert fmt_gain(-12.04) == "-12.0"
