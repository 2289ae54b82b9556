"""Simulation configuration: dataclasses, JSON mapping and validation.

Durations are integers in nanoseconds. In JSON they may also be written as
strings with a unit suffix (``"10ms"``, ``"900s"``, ``"50us"``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from ipaddress import IPv6Address
from typing import Any, Iterable, Mapping

MS = 1_000_000
SEC = 1_000_000_000


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class OverlappingWindow(ConfigError):
    pass


class Component(str, enum.Enum):
    USERSPACE = "userspace"
    DATAPATH = "datapath"


_UNITS = {"ns": 1, "us": 1_000, "ms": MS, "s": SEC, "min": 60 * SEC}
_DUR_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s|min)\s*$")


def parse_duration(value: Any, path: str = "duration") -> int:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a duration, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        m = _DUR_RE.match(value)
        if m:
            return round(float(m.group(1)) * _UNITS[m.group(2)])
    raise ConfigError(path, f"expected nanoseconds or '<number><unit>', got {value!r}")


@dataclass(frozen=True)
class Delay:
    """Uniform integer delay in [low, high] ns; constant when equal."""

    low: int
    high: int | None = None

    def __post_init__(self):
        if self.high is None:
            object.__setattr__(self, "high", self.low)

    def sample(self, rng) -> int:
        if self.low == self.high:
            return self.low
        return rng.randint(self.low, self.high)


@dataclass(frozen=True)
class StressProfile:
    applies_to: Component = Component.USERSPACE
    hit_probability: float = 0.0
    min_delay: int = 0
    max_delay: int = 0


def default_cpu_stress() -> tuple[StressProfile, ...]:
    """CPU overload: heavy scheduler jitter for user-space code, light interrupt jitter in the datapath."""
    return (
        StressProfile(Component.USERSPACE, 0.3, 0, 60 * MS),
        StressProfile(Component.DATAPATH, 0.05, 0, 1 * MS),
    )


@dataclass(frozen=True)
class NodeConfig:
    name: str
    addresses: tuple[IPv6Address, ...]


@dataclass(frozen=True)
class LinkConfig:
    name: str
    endpoints: tuple[str, str]
    one_way_delay: Delay = Delay(50_000)
    loss: float = 0.0
    failure_windows: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class SessionConfig:
    session_id: int
    master: str
    slave: str
    master_addr: IPv6Address
    slave_addr: IPv6Address
    link: str
    interval: int
    detection_time: int = 0  # 0: 3 x interval
    link_id: int = 0
    master_repair: tuple[IPv6Address, ...] = ()
    slave_repair: tuple[IPv6Address, ...] = ()
    start: int = 0

    @property
    def effective_detection_time(self) -> int:
        return self.detection_time or 3 * self.interval


@dataclass(frozen=True)
class TrafficFlow:
    rate_pps: float
    source: str
    destination: str
    session_id: int | None = None
    payload_size: int = 64
    start: int = 1_000_003  # off the probe grid so events rarely share a timestamp


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    duration: int = 900 * SEC
    nodes: tuple[NodeConfig, ...] = ()
    links: tuple[LinkConfig, ...] = ()
    sessions: tuple[SessionConfig, ...] = ()
    stress: Mapping[str, tuple[StressProfile, ...]] = field(default_factory=dict)
    traffic: tuple[TrafficFlow, ...] = ()
    trace: bool = False
    record_frr: bool = False

    def node(self, name: str) -> NodeConfig:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def link(self, name: str) -> LinkConfig:
        for lk in self.links:
            if lk.name == name:
                return lk
        raise KeyError(name)


def _windows_overlap(windows: Iterable[tuple[int, int]]) -> tuple[int, int] | None:
    ordered = sorted(windows)
    for (s0, e0), (s1, e1) in zip(ordered, ordered[1:]):
        if s1 < e0:
            return s1, e1
    return None


def validate(cfg: SimConfig) -> SimConfig:
    if not 0 <= cfg.seed < 1 << 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if cfg.duration <= 0:
        raise ConfigError("duration", "must be positive")
    names = set()
    owners: dict[IPv6Address, str] = {}
    for i, n in enumerate(cfg.nodes):
        if n.name in names:
            raise ConfigError(f"nodes[{i}].name", f"duplicate node {n.name!r}")
        names.add(n.name)
        if not n.addresses:
            raise ConfigError(f"nodes[{i}].addresses", "at least one address required")
        for j, a in enumerate(n.addresses):
            if a in owners:
                raise ConfigError(f"nodes[{i}].addresses[{j}]", f"{a} already owned by {owners[a]}")
            owners[a] = n.name
    link_names = set()
    for i, lk in enumerate(cfg.links):
        p = f"links[{i}]"
        if lk.name in link_names:
            raise ConfigError(f"{p}.name", f"duplicate link {lk.name!r}")
        link_names.add(lk.name)
        a, b = lk.endpoints
        for k, ep in enumerate((a, b)):
            if ep not in names:
                raise ConfigError(f"{p}.endpoints[{k}]", f"unknown node {ep!r}")
        if a == b:
            raise ConfigError(f"{p}.endpoints", "a link needs two distinct nodes")
        if lk.one_way_delay.low < 0 or lk.one_way_delay.high < lk.one_way_delay.low:
            raise ConfigError(f"{p}.one_way_delay", "needs 0 <= min <= max")
        if not 0.0 <= lk.loss <= 1.0:
            raise ConfigError(f"{p}.loss", "must be within [0, 1]")
        for k, (s, e) in enumerate(lk.failure_windows):
            if not 0 <= s < e <= cfg.duration:
                raise OverlappingWindow(
                    f"{p}.failure_windows[{k}]", f"[{s}, {e}) not within [0, {cfg.duration}]"
                )
        bad = _windows_overlap(lk.failure_windows)
        if bad is not None:
            raise OverlappingWindow(f"{p}.failure_windows", f"window {bad} overlaps another")
    pairs = [frozenset(lk.endpoints) for lk in cfg.links]
    if len(set(pairs)) != len(pairs):
        raise ConfigError("links", "at most one link per node pair")
    sids = set()
    for i, s in enumerate(cfg.sessions):
        p = f"sessions[{i}]"
        if s.session_id in sids or not 0 <= s.session_id <= 0xFFFFFFFF:
            raise ConfigError(f"{p}.session_id", "must be a unique 32-bit value")
        sids.add(s.session_id)
        if s.interval <= 0:
            raise ConfigError(f"{p}.interval", "must be positive")
        if s.effective_detection_time < s.interval:
            raise ConfigError(f"{p}.detection_time", "must be >= interval")
        if s.link not in link_names:
            raise ConfigError(f"{p}.link", f"unknown link {s.link!r}")
        if set(cfg.link(s.link).endpoints) != {s.master, s.slave}:
            raise ConfigError(f"{p}.link", "must connect the master and slave nodes")
        if owners.get(s.master_addr) != s.master:
            raise ConfigError(f"{p}.master_addr", f"{s.master_addr} is not an address of {s.master!r}")
        if owners.get(s.slave_addr) != s.slave:
            raise ConfigError(f"{p}.slave_addr", f"{s.slave_addr} is not an address of {s.slave!r}")
        if not 0 <= s.start < cfg.duration:
            raise ConfigError(f"{p}.start", "must lie within the run")
    for node, profiles in cfg.stress.items():
        if node not in names:
            raise ConfigError(f"stress.{node}", "unknown node")
        for k, sp in enumerate(profiles):
            p = f"stress.{node}[{k}]"
            if not 0.0 <= sp.hit_probability <= 1.0:
                raise ConfigError(f"{p}.hit_probability", "must be within [0, 1]")
            if not 0 <= sp.min_delay <= sp.max_delay:
                raise ConfigError(f"{p}.delay", "needs 0 <= min <= max")
        kinds = [sp.applies_to for sp in profiles]
        if len(set(kinds)) != len(kinds):
            raise ConfigError(f"stress.{node}", "one profile per component kind")
    for i, fl in enumerate(cfg.traffic):
        p = f"traffic[{i}]"
        if fl.rate_pps <= 0:
            raise ConfigError(f"{p}.rate_pps", "must be positive")
        for attr in ("source", "destination"):
            if getattr(fl, attr) not in names:
                raise ConfigError(f"{p}.{attr}", f"unknown node {getattr(fl, attr)!r}")
        sess = [s for s in cfg.sessions if {s.master, s.slave} == {fl.source, fl.destination}]
        if fl.session_id is not None:
            sess = [s for s in sess if s.session_id == fl.session_id]
        if not sess:
            raise ConfigError(p, "no session protects the link between source and destination")
        repair = sess[0].master_repair if sess[0].master == fl.source else sess[0].slave_repair
        if not repair:
            raise ConfigError(p, f"session {sess[0].session_id} has no repair list for {fl.source!r}")
    return cfg


def inject_failure(cfg: SimConfig, link: str, window: tuple[int, int]) -> SimConfig:
    """Return a copy of ``cfg`` where ``link`` drops everything during ``window``."""
    try:
        idx = [lk.name for lk in cfg.links].index(link)
    except ValueError:
        raise ConfigError("links", f"unknown link {link!r}") from None
    start, end = window
    if not 0 <= start < end <= cfg.duration:
        raise OverlappingWindow(f"links[{idx}].failure_windows", f"{window} outside [0, {cfg.duration}]")
    lk = cfg.links[idx]
    for s, e in lk.failure_windows:
        if start < e and s < end:
            raise OverlappingWindow(f"links[{idx}].failure_windows", f"{window} overlaps [{s}, {e})")
    new = replace(lk, failure_windows=tuple(sorted((*lk.failure_windows, (start, end)))))
    links = cfg.links[:idx] + (new,) + cfg.links[idx + 1 :]
    return validate(replace(cfg, links=links))


# -- JSON mapping ---------------------------------------------------------


def _addr(v: Any, path: str) -> IPv6Address:
    try:
        return IPv6Address(v)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from None


def _delay(v: Any, path: str) -> Delay:
    if isinstance(v, Mapping):
        lo = parse_duration(v.get("min", 0), f"{path}.min")
        hi = parse_duration(v.get("max", lo), f"{path}.max")
        return Delay(lo, hi)
    return Delay(parse_duration(v, path))


def _req(d: Mapping, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}", "missing")
    return d[key]


def _stress_profile(d: Mapping, path: str) -> StressProfile:
    try:
        kind = Component(d.get("applies_to", "userspace").lower())
    except ValueError:
        raise ConfigError(f"{path}.applies_to", "must be 'userspace' or 'datapath'") from None
    if "delay" in d:
        dl = _delay(d["delay"], f"{path}.delay")
        lo, hi = dl.low, dl.high
    else:
        lo = parse_duration(d.get("min_delay", 0), f"{path}.min_delay")
        hi = parse_duration(d.get("max_delay", lo), f"{path}.max_delay")
    return StressProfile(kind, float(d.get("hit_probability", 0.0)), lo, hi)


def stress_from_json(v: Any, path: str = "stress") -> tuple[StressProfile, ...]:
    if v == "default":
        return default_cpu_stress()
    if isinstance(v, Mapping):
        v = [v]
    if not isinstance(v, list):
        raise ConfigError(path, "expected 'default', a profile object, or a list of profiles")
    return tuple(_stress_profile(p, f"{path}[{i}]") for i, p in enumerate(v))


def config_from_dict(d: Mapping[str, Any]) -> SimConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("<root>", "expected a JSON object")
    nodes = tuple(
        NodeConfig(
            str(_req(n, "name", f"nodes[{i}]")),
            tuple(
                _addr(a, f"nodes[{i}].addresses[{j}]")
                for j, a in enumerate(_req(n, "addresses", f"nodes[{i}]"))
            ),
        )
        for i, n in enumerate(d.get("nodes", []))
    )
    links = []
    for i, lk in enumerate(d.get("links", [])):
        p = f"links[{i}]"
        eps = _req(lk, "endpoints", p)
        if not isinstance(eps, list) or len(eps) != 2:
            raise ConfigError(f"{p}.endpoints", "expected two node names")
        windows = tuple(
            (parse_duration(w[0], f"{p}.failure_windows[{k}][0]"), parse_duration(w[1], f"{p}.failure_windows[{k}][1]"))
            for k, w in enumerate(lk.get("failure_windows", []))
        )
        links.append(
            LinkConfig(
                name=str(lk.get("name", f"{eps[0]}-{eps[1]}")),
                endpoints=(str(eps[0]), str(eps[1])),
                one_way_delay=_delay(lk.get("one_way_delay", 50_000), f"{p}.one_way_delay"),
                loss=float(lk.get("loss", 0.0)),
                failure_windows=windows,
            )
        )
    sessions = []
    for i, s in enumerate(d.get("sessions", [])):
        p = f"sessions[{i}]"
        sessions.append(
            SessionConfig(
                session_id=int(_req(s, "session_id", p)),
                master=str(_req(s, "master", p)),
                slave=str(_req(s, "slave", p)),
                master_addr=_addr(_req(s, "master_addr", p), f"{p}.master_addr"),
                slave_addr=_addr(_req(s, "slave_addr", p), f"{p}.slave_addr"),
                link=str(_req(s, "link", p)),
                interval=parse_duration(_req(s, "interval", p), f"{p}.interval"),
                detection_time=parse_duration(s.get("detection_time", 0), f"{p}.detection_time"),
                link_id=int(s.get("link_id", 0)),
                master_repair=tuple(
                    _addr(a, f"{p}.master_repair[{k}]") for k, a in enumerate(s.get("master_repair", []))
                ),
                slave_repair=tuple(
                    _addr(a, f"{p}.slave_repair[{k}]") for k, a in enumerate(s.get("slave_repair", []))
                ),
                start=parse_duration(s.get("start", 0), f"{p}.start"),
            )
        )
    stress = {str(k): stress_from_json(v, f"stress.{k}") for k, v in d.get("stress", {}).items()}
    traffic = []
    for i, t in enumerate(d.get("traffic", [])):
        p = f"traffic[{i}]"
        traffic.append(
            TrafficFlow(
                rate_pps=float(_req(t, "rate_pps", p)),
                source=str(_req(t, "source", p)),
                destination=str(_req(t, "destination", p)),
                session_id=t.get("session_id"),
                payload_size=int(t.get("payload_size", 64)),
                start=parse_duration(t.get("start", 1_000_003), f"{p}.start"),
            )
        )
    try:
        cfg = SimConfig(
            seed=int(d.get("seed", 0)),
            duration=parse_duration(d.get("duration", 900 * SEC), "duration"),
            nodes=nodes,
            links=tuple(links),
            sessions=tuple(sessions),
            stress=stress,
            traffic=tuple(traffic),
            trace=bool(d.get("trace", False)),
            record_frr=bool(d.get("record_frr", False)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("<root>", str(e)) from None
    return validate(cfg)


def _profile_to_dict(sp: StressProfile) -> dict:
    return {
        "applies_to": sp.applies_to.value,
        "hit_probability": sp.hit_probability,
        "min_delay": sp.min_delay,
        "max_delay": sp.max_delay,
    }


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    return {
        "seed": cfg.seed,
        "duration": cfg.duration,
        "nodes": [{"name": n.name, "addresses": [str(a) for a in n.addresses]} for n in cfg.nodes],
        "links": [
            {
                "name": lk.name,
                "endpoints": list(lk.endpoints),
                "one_way_delay": {"min": lk.one_way_delay.low, "max": lk.one_way_delay.high},
                "loss": lk.loss,
                "failure_windows": [list(w) for w in lk.failure_windows],
            }
            for lk in cfg.links
        ],
        "sessions": [
            {
                "session_id": s.session_id,
                "master": s.master,
                "slave": s.slave,
                "master_addr": str(s.master_addr),
                "slave_addr": str(s.slave_addr),
                "link": s.link,
                "interval": s.interval,
                "detection_time": s.detection_time,
                "link_id": s.link_id,
                "master_repair": [str(a) for a in s.master_repair],
                "slave_repair": [str(a) for a in s.slave_repair],
                "start": s.start,
            }
            for s in cfg.sessions
        ],
        "stress": {k: [_profile_to_dict(p) for p in v] for k, v in sorted(cfg.stress.items())},
        "traffic": [
            {
                "rate_pps": t.rate_pps,
                "source": t.source,
                "destination": t.destination,
                "session_id": t.session_id,
                "payload_size": t.payload_size,
                "start": t.start,
            }
            for t in cfg.traffic
        ],
        "trace": cfg.trace,
        "record_frr": cfg.record_frr,
    }


# -- the two-router setup used throughout the experiments -----------------

A_LO = IPv6Address("2001:db8::a")
B_LO = IPv6Address("2001:db8::b")
B_SLAVE = IPv6Address("2001:db8::b5")
BACKUP = IPv6Address("2001:db8:ffff::1")


def two_node_config(
    interval: int = 10 * MS,
    detection_time: int = 0,
    *,
    seed: int = 0,
    duration: int = 900 * SEC,
    one_way_delay: int = 50_000,
    loss: float = 0.0,
    stress_on: str | None = None,
    stress: tuple[StressProfile, ...] | None = None,
    traffic_pps: float | None = None,
) -> SimConfig:
    """Master on R2 probing a slave segment on R3 over one link.

    ``stress_on`` names the role ("master" or "slave") whose node gets the
    stress profiles (``default_cpu_stress()`` unless ``stress`` is given).
    """
    nodes = (NodeConfig("R2", (A_LO,)), NodeConfig("R3", (B_LO, B_SLAVE)))
    links = (LinkConfig("R2-R3", ("R2", "R3"), Delay(one_way_delay), loss),)
    sess = SessionConfig(
        session_id=1,
        master="R2",
        slave="R3",
        master_addr=A_LO,
        slave_addr=B_SLAVE,
        link="R2-R3",
        interval=interval,
        detection_time=detection_time,
        link_id=7,
        master_repair=(BACKUP, B_LO),
        slave_repair=(BACKUP, A_LO),
    )
    stress_map: dict[str, tuple[StressProfile, ...]] = {}
    if stress_on is not None:
        if stress_on not in ("master", "slave"):
            raise ConfigError("stress_on", "must be 'master' or 'slave'")
        stress_map[sess.master if stress_on == "master" else sess.slave] = (
            stress if stress is not None else default_cpu_stress()
        )
    traffic: tuple[TrafficFlow, ...] = ()
    if traffic_pps:
        traffic = (
            TrafficFlow(traffic_pps, "R2", "R3", session_id=1),
            TrafficFlow(traffic_pps, "R3", "R2", session_id=1),
        )
    return validate(
        SimConfig(
            seed=seed,
            duration=duration,
            nodes=nodes,
            links=links,
            sessions=(sess,),
            stress=stress_map,
            traffic=traffic,
        )
    )
