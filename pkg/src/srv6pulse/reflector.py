"""The passive slave function bound to a segment.

For every probe addressed to its segment the reflector rebuilds the path the
probe travels (source address followed by the segment list in travel order),
refreshes the liveness timestamp of that path when the probe acknowledges
something new, and always forwards the probe to its next segment.
"""

from __future__ import annotations

import enum
import functools
import threading
from dataclasses import dataclass
from ipaddress import IPv6Address

from .wire import MissingTlv, NoMoreSegments, ProbePacket, WireError, advance_segment

SERIAL_BITS = 32


def serial_gt(a: int, b: int, bits: int = SERIAL_BITS) -> bool:
    """True when ``a`` is ahead of ``b`` in serial-number order (RFC 1982 style).

    The forward window is half the number space; the exact half-way point is
    treated as not ahead.
    """
    half = 1 << (bits - 1)
    d = (a - b) & ((1 << bits) - 1)
    return 0 < d < half


def serial_max(a: int, b: int, bits: int = SERIAL_BITS) -> int:
    return a if serial_gt(a, b, bits) else b


def is_new_ack(candidate: int, stored: int) -> bool:
    if candidate == 0:
        return False
    if stored == 0:
        return True
    return serial_gt(candidate, stored)


class NotMySegment(WireError):
    pass


class ProbeResult(enum.Enum):
    REFRESHED = "refreshed"
    STALE = "stale"


PathKey = bytes


def path_of(pkt: ProbePacket) -> tuple[IPv6Address, ...]:
    return (pkt.outer.source, *pkt.srh.travel_order())


@functools.lru_cache(maxsize=4096)
def _packed(addr: IPv6Address) -> bytes:
    return addr.packed


def path_key(pkt: ProbePacket) -> PathKey:
    tlv = pkt.tlv
    return b"".join(map(_packed, path_of(pkt))) + tlv.session_id.to_bytes(4, "big")


@dataclass(frozen=True)
class PathRecord:
    path: tuple[IPv6Address, ...]
    session_id: int
    last_update: int | None = None
    last_ack: int = 0
    probes_seen: int = 0
    stale_acks_seen: int = 0
    last_seen: int = 0


def process_probe(
    pkt: ProbePacket,
    state: dict[PathKey, PathRecord],
    now: int,
    segment: IPv6Address | None = None,
    last_key: list | None = None,
) -> tuple[ProbePacket, dict[PathKey, PathRecord], ProbeResult]:
    if segment is not None and pkt.outer.destination != segment:
        raise NotMySegment(f"probe for {pkt.outer.destination}, reflector owns {segment}")
    tlv = pkt.srh.probe_tlv()
    if tlv is None:
        raise MissingTlv("probe carries no probe TLV")
    key = path_key(pkt)
    if last_key is not None:
        last_key.append(key)
    rec = state.get(key)
    if rec is None:
        rec = PathRecord(path=path_of(pkt), session_id=tlv.session_id)
    if is_new_ack(tlv.ack, rec.last_ack):
        rec = PathRecord(
            rec.path, rec.session_id, now, tlv.ack, rec.probes_seen + 1, rec.stale_acks_seen, now
        )
        result = ProbeResult.REFRESHED
    else:
        rec = PathRecord(
            rec.path, rec.session_id, rec.last_update, rec.last_ack,
            rec.probes_seen + 1, rec.stale_acks_seen + 1, now,
        )
        result = ProbeResult.STALE
    # single reference swap keeps (last_ack, last_update) consistent for readers
    state[key] = rec
    if pkt.srh.segments_left == 0:
        raise NoMoreSegments("reflector is the final segment; probe consumed")
    return advance_segment(pkt), state, result


class Reflector:
    """Stateful wrapper around ``process_probe`` for one slave segment."""

    def __init__(
        self,
        segment: IPv6Address,
        detection_time: int | None = None,
        eviction_factor: int = 10,
    ):
        self.segment = IPv6Address(segment)
        self.detection_time = detection_time
        self.eviction_factor = eviction_factor
        self.state: dict[PathKey, PathRecord] = {}
        self.pinned: set[PathKey] = set()
        self.consumed = 0
        self.rejected = 0
        self.last_key: PathKey | None = None
        self._lock = threading.Lock()
        self._keybuf: list = []

    def process(self, pkt: ProbePacket, now: int) -> tuple[ProbePacket | None, ProbeResult | None]:
        """Returns ``(forwarded, result)``; ``forwarded`` is None when the probe is dropped."""
        with self._lock:
            kb = self._keybuf
            kb.clear()
            try:
                fwd, _, result = process_probe(pkt, self.state, now, self.segment, kb)
            except NoMoreSegments:
                self.consumed += 1
                return None, None
            except WireError:
                self.rejected += 1
                return None, None
            finally:
                self.last_key = kb[0] if kb else None
        return fwd, result

    def record(self, key: PathKey) -> PathRecord | None:
        return self.state.get(key)

    def last_update(self, key: PathKey) -> int | None:
        rec = self.state.get(key)
        return None if rec is None else rec.last_update

    def evict(self, now: int) -> int:
        """Drop unpinned records idle longer than ``eviction_factor`` detection times."""
        if self.detection_time is None:
            return 0
        horizon = self.eviction_factor * self.detection_time
        with self._lock:
            stale = [
                k
                for k, r in self.state.items()
                if k not in self.pinned and now - r.last_seen > horizon
            ]
            for k in stale:
                del self.state[k]
        return len(stale)
