"""Deterministic discrete-event simulation of master/slave probing with FRR.

One global clock in integer nanoseconds. Events with equal timestamps run in
insertion order. Every random draw comes from a stream seeded by
``(config.seed, purpose)``, so a run is a pure function of its config.

Stress model: an action of a stressed component is delayed, independently
and with the profile's hit probability, by a uniform draw from its delay
range. Monitor actions (probe send, timeout check, return processing) are
user-space; reflector and FRR work is datapath.
"""

from __future__ import annotations

import bisect
import heapq
import random
import struct
from dataclasses import dataclass, field, replace
from ipaddress import IPv6Address
from typing import Callable

from ..frr import (
    Encapsulate,
    LinkStatusStore,
    RepairList,
    apply_action,
    evaluate_master_frr,
    evaluate_slave_frr,
)
from ..monitor import MonitorSession, SessionState, Transition
from ..reflector import ProbeResult, Reflector, path_key
from ..wire import ProbePacket, ProbeTlv, build_probe, make_ipv6_packet
from .config import Component, ConfigError, LinkConfig, SimConfig, StressProfile, validate

UP, DOWN = SessionState.UP, SessionState.DOWN


class EventLoop:
    __slots__ = ("now", "_queue", "_seq")

    def __init__(self):
        self.now = 0
        self._queue: list = []
        self._seq = 0

    def at(self, t: int, fn: Callable, *args) -> None:
        heapq.heappush(self._queue, (t, self._seq, fn, args))
        self._seq += 1

    def run(self, until: int) -> None:
        q = self._queue
        pop = heapq.heappop
        while q and q[0][0] < until:
            t, _, fn, args = pop(q)
            self.now = t
            fn(*args)

    def pending(self) -> int:
        return len(self._queue)


def stream(seed: int, purpose: str) -> random.Random:
    return random.Random(f"{seed}/{purpose}")


class Jitter:
    """Scheduling delay sampler for one component kind on one node."""

    __slots__ = ("p", "lo", "hi", "rng")

    def __init__(self, profile: StressProfile | None, rng: random.Random):
        self.p = profile.hit_probability if profile else 0.0
        self.lo = profile.min_delay if profile else 0
        self.hi = profile.max_delay if profile else 0
        self.rng = rng

    def draw(self) -> int:
        if self.p <= 0.0:
            return 0
        r = self.rng
        if r.random() < self.p:
            return r.randint(self.lo, self.hi)
        return 0


@dataclass
class LinkCounters:
    injected: int = 0
    delivered: int = 0
    lost: int = 0
    dropped_failure: int = 0
    in_flight: int = 0

    def reconciles(self) -> bool:
        return self.injected == self.delivered + self.lost + self.dropped_failure + self.in_flight


@dataclass
class RoleStats:
    false_positives: int = 0
    true_detections: int = 0
    detection_latencies: list[int] = field(default_factory=list)
    recovery_latencies: list[int] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)

    @property
    def mean_latency(self) -> float:
        lat = self.detection_latencies
        return sum(lat) / len(lat) if lat else 0.0

    @property
    def max_latency(self) -> int:
        return max(self.detection_latencies, default=0)


@dataclass(frozen=True)
class FrrRecord:
    timestamp: int
    node: str
    variant: str  # "map" or "timestamp"
    rerouted: bool
    packet_in: bytes
    packet_out: bytes


@dataclass
class SessionReport:
    session_id: int
    interval: int
    detection_time: int
    master: RoleStats = field(default_factory=RoleStats)
    slave: RoleStats = field(default_factory=RoleStats)
    rerouted_map: int = 0
    rerouted_timestamp: int = 0
    probes_sent: int = 0
    loopbacks: int = 0

    @property
    def rerouted_packets(self) -> int:
        return self.rerouted_map + self.rerouted_timestamp

    def role(self, name: str) -> RoleStats:
        if name not in ("master", "slave"):
            raise ValueError(f"unknown role {name!r}")
        return getattr(self, name)


@dataclass
class CampaignReport:
    seed: int
    duration: int
    sessions: dict[int, SessionReport]
    links: dict[str, LinkCounters]
    backup_delivered: int = 0
    frr_records: list[FrrRecord] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)

    @property
    def rerouted_packets(self) -> int:
        return sum(s.rerouted_packets for s in self.sessions.values())

    def session(self, session_id: int | None = None) -> SessionReport:
        if session_id is None:
            if len(self.sessions) != 1:
                raise ValueError("report has several sessions; pass a session_id")
            return next(iter(self.sessions.values()))
        return self.sessions[session_id]


class Link:
    __slots__ = ("cfg", "loop", "rng", "counters", "starts", "ends", "end_time", "trace", "delay")

    def __init__(self, cfg: LinkConfig, loop: EventLoop, seed: int, end_time: int, trace: list | None):
        self.cfg = cfg
        self.loop = loop
        self.rng = stream(seed, f"link/{cfg.name}")
        self.counters = LinkCounters()
        windows = sorted(cfg.failure_windows)
        self.starts = [s for s, _ in windows]
        self.ends = [e for _, e in windows]
        self.end_time = end_time
        self.trace = trace
        self.delay = cfg.one_way_delay

    def is_failed(self, t: int) -> bool:
        i = bisect.bisect_right(self.starts, t) - 1
        return i >= 0 and t < self.ends[i]

    def transmit(self, now: int, src: str, dst: Node, pkt, encode: Callable[[], bytes] | None = None) -> None:
        c = self.counters
        c.injected += 1
        if self.trace is not None and encode is not None:
            self.trace.append(f"{now} {src}>{dst.name} {encode().hex()}")
        if self.starts and self.is_failed(now):
            c.dropped_failure += 1
            return
        if self.cfg.loss and self.rng.random() < self.cfg.loss:
            c.lost += 1
            return
        arrival = now + self.delay.sample(self.rng)
        if arrival >= self.end_time:
            c.in_flight += 1
            return
        self.loop.at(arrival, self._deliver, dst, pkt)

    def _deliver(self, dst: Node, pkt) -> None:
        self.counters.delivered += 1
        dst.receive(pkt)


class Node:
    def __init__(self, name: str, addresses, userspace: Jitter, datapath: Jitter):
        self.name = name
        self.addresses = frozenset(addresses)
        self.userspace = userspace
        self.datapath = datapath
        self.handlers: dict[IPv6Address, Callable] = {}
        self.sink: Callable | None = None

    def receive(self, pkt) -> None:
        if isinstance(pkt, ProbePacket):
            h = self.handlers.get(pkt.outer.destination)
            if h is not None:
                h(pkt)
        elif self.sink is not None:
            self.sink(pkt)


class SlaveObserver:
    """Tracks the slave-side Up/Down view implied by its refresh timestamps.

    The slave FRR filter reports Down whenever ``now - last_update >= D``; this
    turns that continuous predicate into an explicit transition log.
    """

    def __init__(self, session_id: int, detection_time: int):
        self.session_id = session_id
        self.detection_time = detection_time
        self.state = DOWN
        self.last_update: int | None = None
        self.transitions: list[Transition] = []

    def refresh(self, now: int) -> None:
        if self.state is UP and now - self.last_update >= self.detection_time:
            self.transitions.append(Transition(self.last_update + self.detection_time, self.session_id, UP, DOWN))
            self.state = DOWN
        if self.state is DOWN:
            self.transitions.append(Transition(now, self.session_id, DOWN, UP))
            self.state = UP
        self.last_update = now

    def finish(self, end: int) -> None:
        if self.state is UP and end - self.last_update >= self.detection_time:
            t = self.last_update + self.detection_time
            if t < end:
                self.transitions.append(Transition(t, self.session_id, UP, DOWN))
                self.state = DOWN


class SessionRuntime:
    """Wires one monitor session, its reflector and both FRR filters into the loop."""

    def __init__(self, net: Network, cfg):
        self.net = net
        self.cfg = cfg
        self.report = SessionReport(cfg.session_id, cfg.interval, cfg.effective_detection_time)
        self.master_node = net.nodes[cfg.master]
        self.slave_node = net.nodes[cfg.slave]
        self.link = net.links[cfg.link]
        self.store = LinkStatusStore()
        self.monitor = MonitorSession(
            session_id=cfg.session_id,
            self_addr=cfg.master_addr,
            slave_addr=cfg.slave_addr,
            interval=cfg.interval,
            detection_time=cfg.effective_detection_time,
            link_id=cfg.link_id,
        )
        self.reflector = net.reflector_for(cfg.slave, cfg.slave_addr, cfg.effective_detection_time)
        self.key = path_key(build_probe(cfg.master_addr, cfg.slave_addr, cfg.master_addr, ProbeTlv(cfg.session_id)))
        self.reflector.pinned.add(self.key)
        self.observer = SlaveObserver(cfg.session_id, cfg.effective_detection_time)
        self.master_policy = RepairList(cfg.master_repair, cfg.link_id) if cfg.master_repair else None
        self.slave_policy = RepairList(cfg.slave_repair, cfg.link_id) if cfg.slave_repair else None
        self.master_node.handlers[cfg.master_addr] = self._on_return
        self.slave_node.handlers[cfg.slave_addr] = self._on_slave
        self._encode = net.trace is not None

    def start(self) -> None:
        self.net.loop.at(self.cfg.start, self._tick, self.cfg.start)

    # master, user space
    def _tick(self, t: int) -> None:
        loop = self.net.loop
        j = self.master_node.userspace
        d = j.draw()
        if d:
            loop.at(t + d, self._send)
        else:
            self._send()
        d = j.draw()
        if d:
            loop.at(t + d, self._check)
        else:
            self._check()
        loop.at(t + self.cfg.interval, self._tick, t + self.cfg.interval)

    def _send(self) -> None:
        now = self.net.loop.now
        pkt = self.monitor.send_probe(now)
        self.link.transmit(now, self.master_node.name, self.slave_node, pkt, pkt.encode if self._encode else None)

    def _check(self) -> None:
        self.monitor.check_timeout(self.net.loop.now, self.store)

    def _on_return(self, pkt: ProbePacket) -> None:
        d = self.master_node.userspace.draw()
        if d:
            self.net.loop.at(self.net.loop.now + d, self._process_return, pkt)
        else:
            self._process_return(pkt)

    def _process_return(self, pkt: ProbePacket) -> None:
        self.monitor.on_probe_return(pkt, self.net.loop.now, self.store)

    # slave, datapath
    def _on_slave(self, pkt: ProbePacket) -> None:
        d = self.slave_node.datapath.draw()
        if d:
            self.net.loop.at(self.net.loop.now + d, self._reflect, pkt)
        else:
            self._reflect(pkt)

    def _reflect(self, pkt: ProbePacket) -> None:
        now = self.net.loop.now
        fwd, result = self.reflector.process(pkt, now)
        if result is ProbeResult.REFRESHED and self.reflector.last_key == self.key:
            self.observer.refresh(now)
        if fwd is not None:
            nxt = self.net.owner(fwd.outer.destination)
            link = self.net.link_between(self.slave_node.name, nxt.name)
            link.transmit(now, self.slave_node.name, nxt, fwd, fwd.encode if self._encode else None)

    def finish(self, end: int) -> SessionReport:
        self.observer.finish(end)
        r = self.report
        r.master.transitions = list(self.monitor.transitions)
        r.slave.transitions = list(self.observer.transitions)
        r.probes_sent = self.monitor.probes_sent
        r.loopbacks = self.monitor.loopbacks
        guard = self.link.cfg.one_way_delay.high
        windows = sorted(self.link.cfg.failure_windows)
        for stats in (r.master, r.slave):
            classify(stats, windows, guard)
        return r


def classify(stats: RoleStats, windows: list[tuple[int, int]], guard: int) -> None:
    """Split Up->Down transitions into true detections and false positives."""
    detected = set()
    recovered = set()
    for t in stats.transitions:
        hit = None
        for k, (s, e) in enumerate(windows):
            if s - guard <= t.timestamp_ns < e + guard:
                hit = k
                break
        if t.new_state is DOWN:
            if hit is None:
                stats.false_positives += 1
            else:
                stats.true_detections += 1
                if hit not in detected:
                    detected.add(hit)
                    stats.detection_latencies.append(t.timestamp_ns - windows[hit][0])
        else:
            # first Down->Up at or after the end of a window whose failure was detected
            for k, (s, e) in enumerate(windows):
                if k in detected and k not in recovered and t.timestamp_ns >= e:
                    recovered.add(k)
                    stats.recovery_latencies.append(t.timestamp_ns - e)
                    break


class TrafficSource:
    """Constant-rate IPv6 traffic across a protected link, run through an FRR filter."""

    _PAYLOAD = struct.Struct("!IQ")

    def __init__(self, net: Network, idx: int, flow, rt: SessionRuntime):
        self.net = net
        self.idx = idx
        self.flow = flow
        self.rt = rt
        self.period = max(1, round(1e9 / flow.rate_pps))
        self.src_node = net.nodes[flow.source]
        self.dst_node = net.nodes[flow.destination]
        self.src_addr = min(self.src_node.addresses)
        self.dst_addr = min(self.dst_node.addresses)
        self.is_master = flow.source == rt.cfg.master
        self.policy = rt.master_policy if self.is_master else rt.slave_policy
        self.seq = 0

    def start(self) -> None:
        self.net.loop.at(self.flow.start, self._emit)

    def _emit(self) -> None:
        net = self.net
        now = net.loop.now
        body = self._PAYLOAD.pack(self.idx, self.seq)
        body += bytes(max(0, self.flow.payload_size - len(body)))
        pkt = make_ipv6_packet(self.src_addr, self.dst_addr, body, flow_label=self.idx & 0xFFFFF)
        self.seq += 1
        rt = self.rt
        if self.is_master:
            action = evaluate_master_frr(pkt, self.policy, rt.store)
            variant = "map"
        else:
            action = evaluate_slave_frr(
                pkt, self.policy, rt.reflector.last_update(rt.key), now, rt.cfg.effective_detection_time
            )
            variant = "timestamp"
        out = apply_action(pkt, action, self.src_addr)
        rerouted = isinstance(action, Encapsulate)
        if net.record_frr:
            net.frr_records.append(FrrRecord(now, self.src_node.name, variant, rerouted, pkt, out))
        if rerouted:
            if self.is_master:
                rt.report.rerouted_map += 1
            else:
                rt.report.rerouted_timestamp += 1
            # the repair path is not modelled hop by hop; it is assumed healthy
            net.backup_delivered += 1
        else:
            rt.link.transmit(now, self.src_node.name, self.dst_node, out)
        net.loop.at(now + self.period, self._emit)


class Network:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.loop = EventLoop()
        self.trace: list[str] | None = [] if cfg.trace else None
        self.record_frr = cfg.record_frr
        self.frr_records: list[FrrRecord] = []
        self.backup_delivered = 0
        self.nodes: dict[str, Node] = {}
        self._owner: dict[IPv6Address, Node] = {}
        for n in cfg.nodes:
            profiles = {p.applies_to: p for p in cfg.stress.get(n.name, ())}
            node = Node(
                n.name,
                n.addresses,
                Jitter(profiles.get(Component.USERSPACE), stream(cfg.seed, f"stress/{n.name}/userspace")),
                Jitter(profiles.get(Component.DATAPATH), stream(cfg.seed, f"stress/{n.name}/datapath")),
            )
            self.nodes[n.name] = node
            for a in n.addresses:
                self._owner[a] = node
        self.links: dict[str, Link] = {
            lk.name: Link(lk, self.loop, cfg.seed, cfg.duration, self.trace) for lk in cfg.links
        }
        self._pairs = {frozenset(lk.cfg.endpoints): lk for lk in self.links.values()}
        self._reflectors: dict[tuple[str, IPv6Address], Reflector] = {}
        self.sessions = [SessionRuntime(self, s) for s in cfg.sessions]
        by_id = {rt.cfg.session_id: rt for rt in self.sessions}
        self.traffic = []
        for i, fl in enumerate(cfg.traffic):
            rts = [
                rt
                for rt in self.sessions
                if {rt.cfg.master, rt.cfg.slave} == {fl.source, fl.destination}
            ]
            rt = by_id[fl.session_id] if fl.session_id is not None else rts[0]
            self.traffic.append(TrafficSource(self, i, fl, rt))

    def reflector_for(self, node: str, segment: IPv6Address, detection_time: int) -> Reflector:
        key = (node, segment)
        if key not in self._reflectors:
            self._reflectors[key] = Reflector(segment, detection_time)
        return self._reflectors[key]

    def owner(self, addr: IPv6Address) -> Node:
        return self._owner[addr]

    def link_between(self, a: str, b: str) -> Link:
        return self._pairs[frozenset((a, b))]

    def _sweep(self, refl: Reflector, period: int) -> None:
        refl.evict(self.loop.now)
        self.loop.at(self.loop.now + period, self._sweep, refl, period)

    def run(self) -> CampaignReport:
        for refl in self._reflectors.values():
            period = refl.eviction_factor * refl.detection_time
            self.loop.at(period, self._sweep, refl, period)
        for rt in self.sessions:
            rt.start()
        for tr in self.traffic:
            tr.start()
        self.loop.run(self.cfg.duration)
        end = self.cfg.duration
        sessions = {rt.cfg.session_id: rt.finish(end) for rt in self.sessions}
        return CampaignReport(
            seed=self.cfg.seed,
            duration=end,
            sessions=sessions,
            links={name: lk.counters for name, lk in self.links.items()},
            backup_delivered=self.backup_delivered,
            frr_records=self.frr_records,
            trace=self.trace or [],
        )


def run(cfg: SimConfig) -> CampaignReport:
    validate(cfg)
    return Network(cfg).run()


def verify_frr(cfg: SimConfig) -> CampaignReport:
    """Run with per-packet FRR recording enabled; ``cfg`` must define traffic."""
    if not cfg.traffic:
        raise ConfigError("traffic", "verify_frr needs at least one traffic flow")
    return run(replace(cfg, record_frr=True))
