#!/usr/bin/env python3
"""Stressed master against stressed slave under the same stress schedule.

For each threshold, one campaign puts the default CPU stress on the master's
node and another puts it on the slave's node. The master runs in user space
and feels the full profile; the slave's reflector only sees the datapath
jitter.
"""

import argparse
import sys

from srv6pulse.netsim import SEC, default_cpu_stress, two_node_config
from srv6pulse.netsim.campaign import run_sweep, sweep_points


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intervals-ms", type=float, nargs="+", default=[5, 10, 20, 40])
    ap.add_argument("--multiplier", type=float, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--duration-s", type=float, default=900)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)

    base = two_node_config(duration=round(args.duration_s * SEC))
    points = sweep_points(args.intervals_ms, [args.multiplier], [args.seed])
    rows = run_sweep(base, points, default_cpu_stress(), jobs=args.jobs)
    by = {(float(r["interval_ms"]), r["role"]): int(r["false_positives"]) for r in rows}

    print(f"{'threshold':>12} {'master stressed':>16} {'slave stressed':>15}")
    for ms in args.intervals_ms:
        label = f"{args.multiplier:g}x{ms:g} ms"
        print(f"{label:>12} {by[ms, 'master']:>16} {by[ms, 'slave']:>15}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
