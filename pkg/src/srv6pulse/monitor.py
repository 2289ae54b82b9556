"""Master-side liveness session.

The master emits a probe every interval through the slave segment and back
to itself. Each probe carries SEQ (its own number) and ACK (the highest SEQ
seen looping back). When nothing has looped back for ``detection_time`` the
session goes Down, flips the link-status flag so the FRR filter reroutes,
and keeps probing with SEQ=ACK=0 until one of those probes returns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from ipaddress import IPv6Address
from typing import Callable, NamedTuple

from .frr import LinkStatus, LinkStatusStore, set_link_status
from .reflector import serial_gt, serial_max
from .wire import ProbePacket, ProbeTlv, build_probe

SEQ_MOD = 1 << 32
DEFAULT_MULTIPLIER = 3


class SessionState(enum.Enum):
    DOWN = "Down"
    UP = "Up"


class Transition(NamedTuple):
    timestamp_ns: int
    session_id: int
    old_state: SessionState
    new_state: SessionState

    def log_line(self) -> str:
        return f"{self.timestamp_ns} {self.old_state.value} {self.new_state.value} {self.session_id}"


def next_seq_after(seq: int) -> int:
    n = (seq + 1) % SEQ_MOD
    return n or 1


@dataclass
class MonitorSession:
    session_id: int
    self_addr: IPv6Address
    slave_addr: IPv6Address
    interval: int
    detection_time: int = 0  # 0: DEFAULT_MULTIPLIER * interval
    link_id: int = 0
    hop_limit: int = 64
    state: SessionState = SessionState.DOWN
    next_seq: int = 1
    highest_looped: int = 0
    last_loopback: int | None = None
    transitions: list[Transition] = field(default_factory=list)
    probes_sent: int = 0
    loopbacks: int = 0
    foreign: int = 0
    on_transition: Callable[[Transition], None] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.self_addr = IPv6Address(self.self_addr)
        self.slave_addr = IPv6Address(self.slave_addr)
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if not self.detection_time:
            self.detection_time = DEFAULT_MULTIPLIER * self.interval
        if self.detection_time < self.interval:
            raise ValueError(
                f"detection_time {self.detection_time} shorter than interval {self.interval}"
            )
        if not 1 <= self.next_seq < SEQ_MOD:
            raise ValueError("next_seq must be in [1, 2^32)")

    def _transition(self, now: int, new: SessionState, store: LinkStatusStore | None) -> None:
        t = Transition(now, self.session_id, self.state, new)
        self.state = new
        self.transitions.append(t)
        if store is not None:
            status = LinkStatus.UP if new is SessionState.UP else LinkStatus.DOWN
            set_link_status(store, self.link_id, status)
        if self.on_transition is not None:
            self.on_transition(t)

    def send_probe(self, now: int) -> ProbePacket:
        if self.state is SessionState.UP:
            seq, ack = self.next_seq, self.highest_looped
            self.next_seq = next_seq_after(self.next_seq)
        else:
            seq = ack = 0
        tlv = ProbeTlv(
            session_id=self.session_id,
            seq=seq,
            ack=ack,
            interval_ms=min(self.interval // 1_000_000, 0xFFFFFFFF),
        )
        self.probes_sent += 1
        return build_probe(self.self_addr, self.slave_addr, self.self_addr, tlv, self.hop_limit)

    def on_probe_return(self, pkt: ProbePacket, now: int, store: LinkStatusStore | None = None) -> bool:
        """Account for a looped-back probe. Returns False when it is not ours."""
        tlv = pkt.srh.probe_tlv()
        if (
            tlv is None
            or tlv.session_id != self.session_id
            or pkt.outer.destination != self.self_addr
        ):
            self.foreign += 1
            return False
        self.loopbacks += 1
        # any loop-back, even seq=0 or a late duplicate, proves both directions work
        self.last_loopback = now
        if tlv.seq != 0:
            self.highest_looped = (
                tlv.seq if self.highest_looped == 0 else serial_max(tlv.seq, self.highest_looped)
            )
        if self.state is SessionState.DOWN:
            self._transition(now, SessionState.UP, store)
        return True

    def check_timeout(self, now: int, store: LinkStatusStore | None = None) -> bool:
        """Declare the session Down once the detection time has elapsed. True on transition."""
        if self.state is not SessionState.UP:
            return False
        assert self.last_loopback is not None
        if now - self.last_loopback >= self.detection_time:
            self._transition(now, SessionState.DOWN, store)
            return True
        return False


def send_probe(sess: MonitorSession, now: int) -> tuple[ProbePacket, MonitorSession]:
    return sess.send_probe(now), sess


def on_probe_return(
    sess: MonitorSession, pkt: ProbePacket, now: int, store: LinkStatusStore | None
) -> tuple[MonitorSession, LinkStatusStore | None]:
    sess.on_probe_return(pkt, now, store)
    return sess, store


def check_timeout(
    sess: MonitorSession, now: int, store: LinkStatusStore | None
) -> tuple[MonitorSession, LinkStatusStore | None]:
    sess.check_timeout(now, store)
    return sess, store


__all__ = [
    "MonitorSession",
    "SessionState",
    "Transition",
    "send_probe",
    "on_probe_return",
    "check_timeout",
    "serial_gt",
]
