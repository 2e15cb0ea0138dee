"""Compare TPE with uniform random search on the separable synthetic objective.

    python3 scripts/tpe_vs_random.py --seeds 20 --trials 50
"""

from __future__ import annotations

import argparse
import statistics
import time

from graphtune.space import default_search_space
from graphtune.tpe import best_trial, optimize, separable_objective


def best_values(sampler: str, seeds: int, trials: int) -> list[float]:
    space = default_search_space()
    return [best_trial(optimize(separable_objective, space, trials, seed, sampler)).objective for seed in range(seeds)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--trials", type=int, default=50)
    args = ap.parse_args()

    t0 = time.perf_counter()
    print(f"{'sampler':8} {'median':>7} {'mean':>7} {'hit@1.0':>8}")
    for sampler in ("tpe", "random"):
        vals = best_values(sampler, args.seeds, args.trials)
        hits = sum(v >= 1.0 - 1e-9 for v in vals) / len(vals)
        print(f"{sampler:8} {statistics.median(vals):7.3f} {statistics.fmean(vals):7.3f} {hits:8.2f}")
    print(f"({args.seeds} seeds x {args.trials} trials, {time.perf_counter() - t0:.2f}s)")


if __name__ == "__main__":
    main()
