"""Run the three-metric study on the bundled toy benchmark with the mock backend.

Writes one report directory per metric under --out and prints a combined
summary table.

    python3 scripts/run_mock_study.py --out runs/toy --trials 50
"""

from __future__ import annotations

import argparse
import shutil
import time
from pathlib import Path

from graphtune.evaluation import METRICS
from graphtune.report import summary_csv
from graphtune.runner import StudySettings, run_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("runs/toy"))
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fresh", action="store_true", help="delete existing output first")
    args = ap.parse_args()

    lines: list[str] = []
    for metric in METRICS:
        out = args.out / metric
        if args.fresh and out.exists():
            shutil.rmtree(out)
        t0 = time.perf_counter()
        settings = StudySettings(metric=metric, n_trials=args.trials, optimizer_seed=args.seed, output_dir=out)
        report = run_study(settings, resume=True)
        rows = summary_csv(report).splitlines()
        if not lines:
            lines.append(rows[0])
        lines.extend(rows[1:])
        print(f"{metric}: best trial {report.best_trial_index} {report.best_config.to_dict()} "
              f"({time.perf_counter() - t0:.1f}s)")
    print()
    print("\n".join(lines))


if __name__ == "__main__":
    main()
