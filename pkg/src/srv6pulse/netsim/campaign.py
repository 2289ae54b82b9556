"""Parameter sweeps over (interval, multiplier, seed, role).

For each point the base config's single session gets the point's interval and
detection time, and, when a stress profile is supplied, that profile is put on
the node hosting the measured role while every other node runs unstressed.
That mirrors moving the stressed router between the two roles.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .config import MS, ConfigError, SimConfig, StressProfile, validate
from .sim import run

ROLES = ("master", "slave")

CSV_COLUMNS = (
    "interval_ms",
    "multiplier",
    "detection_ms",
    "seed",
    "role",
    "false_positives",
    "true_detections",
    "mean_latency_ms",
    "max_latency_ms",
    "rerouted_packets",
)


@dataclass(frozen=True)
class SweepPoint:
    interval_ms: float
    multiplier: float
    seed: int
    role: str

    @property
    def interval(self) -> int:
        return round(self.interval_ms * MS)

    @property
    def detection_time(self) -> int:
        return round(self.interval_ms * self.multiplier * MS)


def sweep_points(
    intervals_ms: Sequence[float],
    multipliers: Sequence[float],
    seeds: Sequence[int],
    roles: Sequence[str] = ROLES,
) -> list[SweepPoint]:
    for r in roles:
        if r not in ROLES:
            raise ConfigError("roles", f"unknown role {r!r}")
    return [
        SweepPoint(float(i), float(m), int(s), r)
        for i, m, s, r in itertools.product(intervals_ms, multipliers, seeds, roles)
    ]


def point_config(
    base: SimConfig, point: SweepPoint, stress: tuple[StressProfile, ...] | None = None
) -> SimConfig:
    if len(base.sessions) != 1:
        raise ConfigError("sessions", "sweeps need exactly one template session")
    sess = replace(base.sessions[0], interval=point.interval, detection_time=point.detection_time)
    cfg = replace(base, seed=point.seed, sessions=(sess,))
    if stress is not None:
        host = sess.master if point.role == "master" else sess.slave
        cfg = replace(cfg, stress={host: stress})
    return validate(cfg)


def _fmt(x: float) -> str:
    return f"{x:g}"


def run_point(
    base: SimConfig, point: SweepPoint, stress: tuple[StressProfile, ...] | None = None
) -> dict[str, str]:
    report = run(point_config(base, point, stress))
    sess = report.session()
    stats = sess.role(point.role)
    rerouted = sess.rerouted_map if point.role == "master" else sess.rerouted_timestamp
    return {
        "interval_ms": _fmt(point.interval_ms),
        "multiplier": _fmt(point.multiplier),
        "detection_ms": _fmt(point.detection_time / MS),
        "seed": str(point.seed),
        "role": point.role,
        "false_positives": str(stats.false_positives),
        "true_detections": str(stats.true_detections),
        "mean_latency_ms": f"{stats.mean_latency / MS:.6f}",
        "max_latency_ms": f"{stats.max_latency / MS:.6f}",
        "rerouted_packets": str(rerouted),
    }


def _run_point_args(args):
    return run_point(*args)


def run_sweep(
    base: SimConfig,
    points: Iterable[SweepPoint],
    stress: tuple[StressProfile, ...] | None = None,
    jobs: int = 1,
) -> list[dict[str, str]]:
    """Run every point; rows come back in point order whatever ``jobs`` is."""
    work = [(base, p, stress) for p in points]
    if jobs <= 1 or len(work) <= 1:
        return [run_point(*w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point_args, work))
