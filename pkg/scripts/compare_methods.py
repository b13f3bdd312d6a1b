"""Baseline vs taxonomy regularizers on the synthetic semi-supervised benchmark.

    python scripts/compare_methods.py --labeled 0.2 0.3 0.4 --seeds 0 1 2 3 4
"""

import argparse

import numpy as np

from taxloss.experiments import DEFAULT_W, compare_methods
from taxloss.trainer import Method


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--labeled", type=float, nargs="+", default=[0.2], choices=[0.2, 0.3, 0.4])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--methods", nargs="+", default=[m.value for m in Method])
    ap.add_argument("--w", type=float, action="append", default=[], metavar="W",
                    help="override w, one value per non-baseline method in order")
    args = ap.parse_args()

    weights = dict(DEFAULT_W)
    others = [Method(m) for m in args.methods if m != "baseline"]
    for m, w in zip(others, args.w):
        weights[m] = w

    for frac in args.labeled:
        c = compare_methods(args.seeds, args.methods, labeled=frac, weights=weights)
        print(f"\n{int(frac * 100)}% labelled, seeds {args.seeds} ({c.seconds:.1f}s)")
        print(f"{'method':>9}  {'w':>6}  {'acc':>6}  {'macro':>6}  {'weighted':>8}  wins")
        for m in args.methods:
            reps = c.reports[m]
            acc = np.mean([r.accuracy for r in reps])
            wf1 = np.mean([r.weighted_avg_f1 for r in reps])
            wins = "" if m == "baseline" else f"{c.wins(m)}/{len(args.seeds)}"
            print(f"{m:>9}  {weights[Method(m)]:>6g}  {acc:.4f}  {np.mean(c.macro_f1[m]):.4f}  {wf1:>8.4f}  {wins}")


if __name__ == "__main__":
    main()
