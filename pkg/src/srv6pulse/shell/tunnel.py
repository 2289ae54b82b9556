"""Live master/slave over UDP.

Each datagram carries one complete IPv6+SRH probe, byte-for-byte what the
simulator would put on the wire. Emitting raw SRv6 needs kernel privileges,
so the UDP socket stands in for the link.
"""

from __future__ import annotations

import asyncio
import signal
import sys
import time
from dataclasses import dataclass, field
from ipaddress import IPv6Address
from typing import TextIO

from ..frr import LinkStatusStore
from ..monitor import MonitorSession, SessionState, Transition
from ..reflector import ProbeResult, Reflector
from ..wire import WireError, decode_probe

MIN_LIVE_DETECTION_NS = 1_000_000


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected host:port, got {text!r}")
    host = host.strip("[]")
    return host, int(port)


@dataclass
class TunnelParams:
    role: str
    listen: tuple[str, int]
    peer: tuple[str, int]
    interval_ns: int
    multiplier: int = 3
    session_id: int = 1
    self_addr: IPv6Address = IPv6Address("2001:db8::a")
    slave_addr: IPv6Address = IPv6Address("2001:db8::b5")
    duration_s: float | None = None

    @property
    def detection_ns(self) -> int:
        return self.interval_ns * self.multiplier

    def check(self) -> None:
        if self.role not in ("master", "slave"):
            raise ValueError("role must be master or slave")
        if self.interval_ns <= 0 or self.multiplier < 1:
            raise ValueError("interval must be positive and multiplier >= 1")
        if self.detection_ns < MIN_LIVE_DETECTION_NS:
            raise ValueError("detection times below 1 ms are not supported in live mode")


@dataclass
class TunnelStats:
    sent: int = 0
    received: int = 0
    malformed: int = 0
    transitions: list[Transition] = field(default_factory=list)


class _Endpoint(asyncio.DatagramProtocol):
    def __init__(self, on_packet):
        self.on_packet = on_packet
        self.transport: asyncio.DatagramTransport | None = None

    def connection_made(self, transport):
        self.transport = transport

    def datagram_received(self, data, addr):
        self.on_packet(data)

    def error_received(self, exc):
        # ICMP unreachable while the peer is down; probes simply go missing
        pass


class TunnelNode:
    """Master or slave side. All handlers run on one asyncio loop, which
    serializes timer and receive work on the session."""

    def __init__(self, params: TunnelParams, out: TextIO = sys.stdout):
        params.check()
        self.p = params
        self.out = out
        self.stats = TunnelStats()
        self.store = LinkStatusStore()
        self.session: MonitorSession | None = None
        self.reflector: Reflector | None = None
        self.transport: asyncio.DatagramTransport | None = None
        self._stop = asyncio.Event()
        self._slave_state = SessionState.DOWN
        self._slave_last: int | None = None
        self._last_sweep = time.monotonic_ns()
        if params.role == "master":
            self.session = MonitorSession(
                session_id=params.session_id,
                self_addr=params.self_addr,
                slave_addr=params.slave_addr,
                interval=params.interval_ns,
                detection_time=params.detection_ns,
                on_transition=self._log,
            )
        else:
            self.reflector = Reflector(params.slave_addr, params.detection_ns)

    def _log(self, t: Transition) -> None:
        self.stats.transitions.append(t)
        print(t.log_line(), file=self.out, flush=True)

    def stop(self) -> None:
        self._stop.set()

    def _send(self, data: bytes) -> None:
        if self.transport is not None:
            self.transport.sendto(data, self.p.peer)
            self.stats.sent += 1

    def _on_packet(self, data: bytes) -> None:
        now = time.monotonic_ns()
        try:
            pkt = decode_probe(data)
        except WireError:
            self.stats.malformed += 1
            return
        self.stats.received += 1
        if self.session is not None:
            self.session.on_probe_return(pkt, now, self.store)
            return
        fwd, result = self.reflector.process(pkt, now)
        if now - self._last_sweep > self.reflector.eviction_factor * self.p.detection_ns:
            self.reflector.evict(now)
            self._last_sweep = now
        if result is ProbeResult.REFRESHED:
            self._slave_refresh(now, pkt.tlv.session_id)
        if fwd is not None:
            self._send(fwd.encode())

    def _slave_refresh(self, now: int, session_id: int) -> None:
        # the slave has no timers: a Down period is only noticed once refreshes resume
        d = self.p.detection_ns
        if self._slave_state is SessionState.UP and now - self._slave_last >= d:
            self._log(Transition(self._slave_last + d, session_id, SessionState.UP, SessionState.DOWN))
            self._slave_state = SessionState.DOWN
        if self._slave_state is SessionState.DOWN:
            self._log(Transition(now, session_id, SessionState.DOWN, SessionState.UP))
            self._slave_state = SessionState.UP
        self._slave_last = now

    async def _timer(self) -> None:
        interval = self.p.interval_ns
        nxt = time.monotonic_ns()
        while not self._stop.is_set():
            now = time.monotonic_ns()
            self.session.check_timeout(now, self.store)
            self._send(self.session.send_probe(now).encode())
            nxt += interval
            delay = nxt - time.monotonic_ns()
            if delay < 0:
                # overran: resynchronise instead of bursting
                nxt = time.monotonic_ns()
                delay = 0
            try:
                await asyncio.wait_for(self._stop.wait(), delay / 1e9)
            except asyncio.TimeoutError:
                pass

    async def run(self) -> TunnelStats:
        loop = asyncio.get_running_loop()
        self.transport, _ = await loop.create_datagram_endpoint(
            lambda: _Endpoint(self._on_packet), local_addr=self.p.listen
        )
        try:
            loop.add_signal_handler(signal.SIGINT, self.stop)
            loop.add_signal_handler(signal.SIGTERM, self.stop)
        except (NotImplementedError, RuntimeError):
            pass
        if self.p.duration_s is not None:
            loop.call_later(self.p.duration_s, self.stop)
        print(
            f"# start role={self.p.role} session_id={self.p.session_id} ts={time.monotonic_ns()}",
            file=self.out,
            flush=True,
        )
        try:
            if self.session is not None:
                await self._timer()
            else:
                await self._stop.wait()
        finally:
            self.transport.close()
            try:
                loop.remove_signal_handler(signal.SIGINT)
                loop.remove_signal_handler(signal.SIGTERM)
            except (NotImplementedError, RuntimeError):
                pass
        self._summary()
        return self.stats

    def _summary(self) -> None:
        s = self.stats
        parts = [
            f"# summary role={self.p.role} session_id={self.p.session_id}",
            f"sent={s.sent}",
            f"received={s.received}",
            f"malformed={s.malformed}",
            f"transitions={len(s.transitions)}",
        ]
        if self.session is not None:
            parts.append(f"state={self.session.state.value}")
        else:
            parts.append(f"state={self._slave_state.value}")
        print(" ".join(parts), file=self.out, flush=True)


def run_tunnel(params: TunnelParams, out: TextIO = sys.stdout) -> TunnelStats:
    async def main():
        return await TunnelNode(params, out).run()

    return asyncio.run(main())
