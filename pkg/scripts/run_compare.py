"""Run the four-method comparison and print the resulting table.

Thin wrapper over moprompt.runner.compare_methods. The desk profile
finishes in a few minutes on one core; the paper profile is sized for an
overnight run.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

from moprompt.envs import ENV_NAMES
from moprompt.runner import PROFILES, ConfigError, compare_methods, config_from_dict


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--env", default="tug-of-war", choices=ENV_NAMES)
    parser.add_argument("--m", type=int, default=3, help="number of objectives")
    parser.add_argument("--env-seed", type=int, default=0, help="environment construction seed")
    parser.add_argument("--seed", default="0,1,2", help="comma-separated training seeds")
    parser.add_argument("--steps", type=int, default=None, help="override profile step count")
    parser.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    parser.add_argument("--out-dir", default="runs/compare", help="artifact directory")
    return parser.parse_args(argv)


def print_table(path: str) -> None:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        cells = []
        for i, cell in enumerate(row):
            try:
                cell = f"{float(cell):.2f}"
            except ValueError:
                pass
            cells.append(cell.ljust(widths[i]))
        print("  ".join(cells).rstrip())


def main(argv=None) -> int:
    args = parse_args(argv)
    data = {
        "method": "average",
        "env": {"name": args.env, "m": args.m, "seed": args.env_seed},
        "run": {"seeds": [int(s) for s in args.seed.split(",")], "out_dir": args.out_dir},
    }
    if args.steps is not None:
        data["run"]["steps"] = args.steps
    try:
        cfg = config_from_dict(data, profile=args.profile)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    started = time.perf_counter()
    result = compare_methods(cfg)
    elapsed = time.perf_counter() - started

    for abort in result.aborts:
        print(
            "aborted: method={method} seed={seed} step={step} ({reason})".format(**abort),
            file=sys.stderr,
        )
    print(f"{len(result.records)} evaluation records in {elapsed:.1f}s")
    print(f"artifacts in {args.out_dir}/")
    print()
    print_table(f"{args.out_dir}/table1_analog.csv")
    return 2 if result.aborts else 0


if __name__ == "__main__":
    sys.exit(main())
