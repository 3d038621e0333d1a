#!/usr/bin/env python3
"""Run the desk-scale protocol: train agents at reduced scale and print
their improvement over the fixed-time baseline.

Examples:
  python scripts/desk_scale.py --agent time --seeds 1 2 3
  python scripts/desk_scale.py --agent turn --jobs 4        # all five seeds
"""

import argparse
import time

from tscrl.experiment import (DESK_EVAL_SEEDS, DESK_TRAIN_SEEDS,
                              baseline_reports, run_desk_suite)
from tscrl.traffic import SCENARIO_NAMES


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agent", choices=["turn", "time", "both"], default="both")
    parser.add_argument("--seeds", type=int, nargs="+",
                        default=list(DESK_TRAIN_SEEDS))
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel training processes")
    args = parser.parse_args()

    kinds = ["turn", "time"] if args.agent == "both" else [args.agent]
    t0 = time.perf_counter()
    baselines = baseline_reports(DESK_EVAL_SEEDS)
    print(f"fixed-time baselines evaluated in {time.perf_counter() - t0:.0f}s")

    for kind in kinds:
        results = run_desk_suite(kind, args.seeds, DESK_EVAL_SEEDS,
                                 jobs=args.jobs, baselines=baselines)
        print(f"\n=== {kind}-based agent ===")
        header = "seed  " + "".join(f"{n:>8s}" for n in SCENARIO_NAMES) \
            + "   mean-tawt%  mean-ewpv%"
        print(header)
        for res in results:
            cells = "".join(f"{res.comparisons[n].improvement('tawt'):8.1f}"
                            for n in SCENARIO_NAMES)
            print(f"{res.train_seed:<6d}{cells}"
                  f"{res.mean_metric_improvement('tawt'):12.1f}"
                  f"{res.mean_metric_improvement('ewpv'):12.1f}")
    print(f"\ntotal {time.perf_counter() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
