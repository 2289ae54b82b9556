"""Run manifests for ``simulate`` and the CSV writer."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from ..netsim.campaign import CSV_COLUMNS, ROLES, SweepPoint, sweep_points
from ..netsim.config import ConfigError, SimConfig, StressProfile, config_from_dict, stress_from_json

CSV_SCHEMA = "# srv6pulse-campaign-csv v1"
SEED_ENV = "SRV6PULSE_SEED"
DEFAULT_CAP = 1024


@dataclass
class RunManifest:
    config: SimConfig
    intervals_ms: list[float]
    multipliers: list[float]
    seeds: list[int]
    roles: list[str] = field(default_factory=lambda: list(ROLES))
    stress: tuple[StressProfile, ...] | None = None
    cap: int = DEFAULT_CAP
    config_path: Path | None = None

    def points(self) -> list[SweepPoint]:
        return sweep_points(self.intervals_ms, self.multipliers, self.seeds, self.roles)


def _number_list(d: dict, key: str, cast) -> list:
    v = d.get(key)
    if not isinstance(v, list):
        raise ConfigError(key, "expected a list")
    try:
        return [cast(x) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(key, "expected numbers") from None


def seeds_from_env(value: str) -> list[int]:
    try:
        return [int(s) for s in value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(SEED_ENV, f"expected comma-separated integers, got {value!r}") from None


def manifest_from_dict(d: dict[str, Any], base_dir: Path = Path("."), env=os.environ) -> RunManifest:
    if not isinstance(d, dict):
        raise ConfigError("<manifest>", "expected a JSON object")
    cfg_ref = d.get("config")
    cfg_path = None
    if isinstance(cfg_ref, str):
        cfg_path = (base_dir / cfg_ref).resolve()
        with open(cfg_path) as fh:
            cfg_dict = json.load(fh)
    elif isinstance(cfg_ref, dict):
        cfg_dict = cfg_ref
    else:
        raise ConfigError("config", "expected a path or an inline config object")
    try:
        cfg = config_from_dict(cfg_dict)
    except ConfigError as e:
        raise ConfigError(f"config.{e.path}", str(e).split(": ", 1)[-1]) from None
    intervals = _number_list(d, "intervals_ms", float)
    multipliers = _number_list(d, "multipliers", float)
    seeds = _number_list(d, "seeds", int) if "seeds" in d else [cfg.seed]
    if env.get(SEED_ENV):
        seeds = seeds_from_env(env[SEED_ENV])
    roles = d.get("roles", list(ROLES))
    if not isinstance(roles, list) or not roles or any(r not in ROLES for r in roles):
        raise ConfigError("roles", f"expected a non-empty subset of {list(ROLES)}")
    stress = None if d.get("stress") is None else stress_from_json(d["stress"], "stress")
    cap = int(d.get("cap", DEFAULT_CAP))
    if not intervals or not multipliers or not seeds:
        raise ConfigError("sweep", "intervals_ms, multipliers and seeds must be non-empty")
    if any(i <= 0 for i in intervals):
        raise ConfigError("intervals_ms", "intervals must be positive")
    if any(m < 1 for m in multipliers):
        raise ConfigError("multipliers", "multipliers must be >= 1")
    n = len(intervals) * len(multipliers) * len(seeds)
    if n > cap:
        raise ConfigError("cap", f"sweep of {n} runs exceeds cap {cap}")
    if len(cfg.sessions) != 1:
        raise ConfigError("config.sessions", "sweeps need exactly one template session")
    return RunManifest(cfg, intervals, multipliers, seeds, list(roles), stress, cap, cfg_path)


def load_manifest(path: str | Path, env=os.environ) -> RunManifest:
    path = Path(path)
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError("<manifest>", f"invalid JSON: {e}") from None
    return manifest_from_dict(d, path.parent, env)


def rows_to_csv(rows: Sequence[dict[str, str]]) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def read_csv(text: str) -> list[dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_SCHEMA:
        raise ValueError("missing or unknown CSV schema line")
    return list(csv.DictReader(lines[1:]))
