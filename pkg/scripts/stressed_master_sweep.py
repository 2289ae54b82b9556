#!/usr/bin/env python3
"""False positives of a stressed master across detection thresholds.

Runs 15-minute simulated campaigns at 3x{5,10,20,40} ms with the default CPU
stress profile on the master's node and prints one row per threshold with
the per-seed counts and their mean. ``--csv`` also writes the raw rows.
"""

import argparse
import statistics
import sys
from pathlib import Path

from srv6pulse.netsim import SEC, default_cpu_stress, two_node_config
from srv6pulse.netsim.campaign import run_sweep, sweep_points
from srv6pulse.shell.manifest import rows_to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intervals-ms", type=float, nargs="+", default=[5, 10, 20, 40])
    ap.add_argument("--multiplier", type=float, default=3)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--duration-s", type=float, default=900)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args(argv)

    base = two_node_config(duration=round(args.duration_s * SEC))
    points = sweep_points(args.intervals_ms, [args.multiplier], args.seeds, ["master"])
    rows = run_sweep(base, points, default_cpu_stress(), jobs=args.jobs)
    if args.csv:
        args.csv.write_text(rows_to_csv(rows))

    print(f"{'threshold':>12} {'mean FP':>10}  per seed")
    for ms in args.intervals_ms:
        counts = [int(r["false_positives"]) for r in rows if float(r["interval_ms"]) == ms]
        label = f"{args.multiplier:g}x{ms:g} ms"
        print(f"{label:>12} {statistics.mean(counts):>10.1f}  {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
