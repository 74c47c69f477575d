"""Replicated simulation study for one scenario; prints the aggregate table.

Example::

    python scripts/scenario_study.py --scenario I --reps 50 --methods full,alpha_fixed_1,alpha_fixed_2
"""
import argparse
from pathlib import Path

from gbridge.cli import write_table
from gbridge.model import Hyperparams
from gbridge.scenarios import SCENARIOS, ScenarioSpec, aggregate, replicate_study

COLUMNS = ["method", "reps", "mean_l2", "se_l2", "median_mse", "se_mse", "avg_model_size", "exact_recovery_count", "coverage"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=SCENARIOS, default="I")
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--methods", default="full")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None, help="optional CSV of per-replication rows")
    args = ap.parse_args()

    rows = replicate_study(
        ScenarioSpec.preset(args.scenario, seed=args.seed),
        args.reps,
        tuple(args.methods.split(",")),
        Hyperparams(iterations=args.iterations),
        workers=args.workers,
    )
    if args.out is not None:
        write_table(args.out, list(rows[0]), (r.values() for r in rows))
    print(",".join(COLUMNS))
    for t in aggregate(rows):
        print(",".join(f"{t[c]:.4g}" if isinstance(t[c], float) else str(t[c]) for c in COLUMNS))


if __name__ == "__main__":
    main()
