"""Summarize a metrics.csv produced by the train or compare commands.

Prints, per method and seed, the mean over the last few evaluations of
each headline metric, which is less sensitive to checkpoint luck than
any single row.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from moprompt.runner import read_metrics_csv


def tail_mean(values, n: int) -> float:
    return float(np.mean(values[-n:]))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("path", help="metrics.csv file or directory containing one")
    parser.add_argument("--tail", type=int, default=5, help="evaluations averaged per seed")
    args = parser.parse_args(argv)

    path = args.path if args.path.endswith(".csv") else f"{args.path}/metrics.csv"
    try:
        records = read_metrics_csv(path)
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return 1
    if not records:
        print(f"no records in {path}", file=sys.stderr)
        return 1

    methods = sorted({r.method for r in records})
    print(f"{len(records)} records, methods: {', '.join(methods)}")
    header = ["method", "seed", "evals", "min objective", "product", "average", "hvi"]
    print("  ".join(h.ljust(13) for h in header).rstrip())
    for method in methods:
        for seed in sorted({r.seed for r in records if r.method == method}):
            run = sorted(
                (r for r in records if r.method == method and r.seed == seed),
                key=lambda r: r.step,
            )
            tail = run[-args.tail :]
            floor = tail_mean([min(r.per_objective_means) for r in tail], args.tail)
            cells = [
                method.ljust(13),
                str(seed).ljust(13),
                str(len(run)).ljust(13),
                f"{floor:.4f}".ljust(13),
                f"{tail_mean([r.expected_product for r in tail], args.tail):.4f}".ljust(13),
                f"{tail_mean([r.mean_of_means for r in tail], args.tail):.4f}".ljust(13),
                f"{tail_mean([r.hvi for r in tail], args.tail):.4f}".ljust(13),
            ]
            print("  ".join(cells).rstrip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
