"""Study report files: JSON, the two CSV tables and a static HTML dashboard."""

from __future__ import annotations

import csv
import html
import io
import json
from pathlib import Path

from .runner import StudyReport

SUMMARY_COLUMNS = (
    "benchmark",
    "metric",
    "phase",
    "baseline",
    "baseline_ci_low",
    "baseline_ci_high",
    "optimized",
    "optimized_ci_low",
    "optimized_ci_high",
    "relative_gain_pct",
)
RUNNING_MAX_COLUMNS = ("trial", "objective", "running_max")


def fmt_gain(gain: float | None) -> str:
    return "--" if gain is None else f"{gain:.1f}"


def summary_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    phases = (
        ("train", report.baseline_train, report.train, report.gain_train),
        ("holdout", report.baseline_holdout, report.holdout, report.gain_holdout),
    )
    for phase, base, opt, gain in phases:
        b, o = base.report, opt.report
        writer.writerow(
            [
                report.benchmark,
                report.metric,
                phase,
                f"{b.mean:.3f}",
                f"{b.ci_low:.3f}",
                f"{b.ci_high:.3f}",
                f"{o.mean:.3f}",
                f"{o.ci_low:.3f}",
                f"{o.ci_high:.3f}",
                fmt_gain(gain),
            ]
        )
    return buf.getvalue()


def running_max_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUNNING_MAX_COLUMNS)
    objectives = report.trial_objectives
    for idx, best in report.running_max:
        obj = objectives[idx]
        writer.writerow([idx, "" if obj is None else f"{obj:.6f}", f"{best:.6f}"])
    return buf.getvalue()


# -- dashboard ---------------------------------------------------------------


def _line_chart(points: list[tuple[int, float]], raw: list[float | None], width=640, height=260) -> str:
    pad = 40
    n = max(len(raw), 1)

    def x(i: float) -> float:
        return pad + (width - 2 * pad) * (i / max(n - 1, 1))

    def y(v: float) -> float:
        return height - pad - (height - 2 * pad) * v

    dots = "".join(
        f'<circle cx="{x(i):.1f}" cy="{y(v):.1f}" r="3" fill="#9aa5b1"/>' for i, v in enumerate(raw) if v is not None
    )
    path = " ".join(f"{x(i):.1f},{y(v):.1f}" for i, v in points)
    axes = (
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>'
        f'<text x="{pad - 8}" y="{y(1.0) + 4:.1f}" text-anchor="end" font-size="11">1.0</text>'
        f'<text x="{pad - 8}" y="{y(0.0) + 4:.1f}" text-anchor="end" font-size="11">0.0</text>'
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="11">trial</text>'
    )
    line = f'<polyline points="{path}" fill="none" stroke="#1f6feb" stroke-width="2"/>' if points else ""
    return f'<svg width="{width}" height="{height}" role="img">{axes}{dots}{line}</svg>'


def _bar_chart(rows: list[tuple[str, float, float, float]], width=640, height=240) -> str:
    pad = 40
    slot = (width - 2 * pad) / max(len(rows), 1)
    bars = []
    for i, (label, mean, low, high) in enumerate(rows):
        bx = pad + i * slot + slot * 0.2
        bw = slot * 0.6
        top = height - pad - (height - 2 * pad) * mean
        colour = "#9aa5b1" if label.startswith("baseline") else "#1f6feb"
        bars.append(
            f'<rect x="{bx:.1f}" y="{top:.1f}" width="{bw:.1f}" height="{height - pad - top:.1f}" fill="{colour}"/>'
            f'<line x1="{bx + bw / 2:.1f}" x2="{bx + bw / 2:.1f}" '
            f'y1="{height - pad - (height - 2 * pad) * low:.1f}" y2="{height - pad - (height - 2 * pad) * high:.1f}" '
            f'stroke="#111" stroke-width="2"/>'
            f'<text x="{bx + bw / 2:.1f}" y="{height - pad + 14}" text-anchor="middle" font-size="11">'
            f"{html.escape(label)}</text>"
            f'<text x="{bx + bw / 2:.1f}" y="{top - 4:.1f}" text-anchor="middle" font-size="11">{mean:.3f}</text>'
        )
    axis = f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>'
    return f'<svg width="{width}" height="{height}" role="img">{axis}{"".join(bars)}</svg>'


def dashboard_html(report: StudyReport) -> str:
    esc = html.escape
    bars = [
        ("baseline train", report.baseline_train.report),
        ("optimized train", report.train.report),
        ("baseline hold-out", report.baseline_holdout.report),
        ("optimized hold-out", report.holdout.report),
    ]
    bar_rows = [(label, r.mean, r.ci_low, r.ci_high) for label, r in bars]

    rows = []
    for phase, base, opt in (
        ("train", report.baseline_train, report.train),
        ("hold-out", report.baseline_holdout, report.holdout),
    ):
        base_scores = {q.instance_id: q for q in base.report.per_question}
        for q in opt.report.per_question:
            info = report.questions.get(q.instance_id, {})
            b = base_scores.get(q.instance_id)
            cls = "miss" if q.value < 1.0 else "hit"
            rows.append(
                f'<tr class="{cls}"><td>{esc(phase)}</td><td>{esc(q.instance_id)}</td>'
                f"<td>{esc(info.get('question', ''))}</td><td>{esc(info.get('gold', ''))}</td>"
                f"<td>{esc(base.predictions.get(q.instance_id, ''))}</td>"
                f"<td>{'' if b is None else f'{b.value:.3f}'}</td>"
                f"<td>{esc(opt.predictions.get(q.instance_id, ''))}</td><td>{q.value:.3f}</td>"
                f"<td>{esc(q.error_note or '')}</td></tr>"
            )
    config_rows = "".join(
        f"<tr><th>{esc(k)}</th><td>{esc(str(v))}</td></tr>" for k, v in report.best_config.to_dict().items()
    )
    return f"""<!DOCTYPE html>
<html lang="en"><head><meta charset="utf-8">
<title>{esc(report.benchmark)} / {esc(report.metric)} study</title>
<style>
body {{ font-family: sans-serif; margin: 2em; color: #111; }}
table {{ border-collapse: collapse; margin-bottom: 2em; font-size: 13px; }}
td, th {{ border: 1px solid #ccc; padding: 4px 8px; text-align: left; vertical-align: top; }}
tr.miss td {{ background: #fff4f4; }}
</style></head><body>
<h1>{esc(report.benchmark)}: {esc(report.metric)}</h1>
<h2>Best configuration (trial {report.best_trial_index})</h2>
<table>{config_rows}</table>
<h2>Running maximum</h2>
{_line_chart(report.running_max, report.trial_objectives)}
<h2>Baseline vs optimized (95% bootstrap CI)</h2>
{_bar_chart(bar_rows)}
<p>Relative gain: train {fmt_gain(report.gain_train)}%, hold-out {fmt_gain(report.gain_holdout)}%</p>
<h2>Per-question results</h2>
<table><tr><th>phase</th><th>id</th><th>question</th><th>gold</th><th>baseline answer</th>
<th>baseline score</th><th>optimized answer</th><th>optimized score</th><th>note</th></tr>
{"".join(rows)}
</table>
</body></html>
"""


def emit_report(report: StudyReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        "summary.csv": summary_csv(report),
        "running_max.csv": running_max_csv(report),
        "dashboard.html": dashboard_html(report),
    }
    paths = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths[name] = path
    return paths


def load_report(out_dir: str | Path) -> StudyReport:
    return StudyReport.from_dict(json.loads((Path(out_dir) / "report.json").read_text(encoding="utf-8")))
