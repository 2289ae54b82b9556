"""TI-LFA fast-reroute filters.

Two variants decide, per packet, whether it goes out untouched or gets an
outer IPv6 header + SRH carrying the repair list:

* ``evaluate_master_frr`` reads a link-status flag written by the detector
  (the map-driven variant used on the probing side).
* ``evaluate_slave_frr`` has no detector to write a flag, so it derives the
  status from the last liveness refresh timestamp and a fixed threshold.
"""

from __future__ import annotations

import enum
import threading
import warnings
from dataclasses import dataclass
from ipaddress import IPv6Address
from typing import Sequence, Union

from .wire import push_encap

MAX_REPAIR_SEGMENTS = 4


class LinkStatus(enum.IntEnum):
    DOWN = 0
    UP = 1


class ClockSkew(ValueError):
    pass


class LinkStatusStore:
    """Per-link Up/Down flags shared between one detector and many forwarders.

    Missing links read as Up so that nothing is rerouted before a detector
    has ever reported on the link.
    """

    def __init__(self, initial: dict[int, LinkStatus] | None = None):
        self._status: dict[int, LinkStatus] = dict(initial or {})
        self._lock = threading.Lock()
        self.writes = 0

    def get(self, link_id: int) -> LinkStatus:
        # single dict lookup of an immutable value: never torn
        return self._status.get(link_id, LinkStatus.UP)

    def set(self, link_id: int, status: LinkStatus) -> None:
        with self._lock:
            self._status[link_id] = LinkStatus(status)
            self.writes += 1

    def snapshot(self) -> dict[int, LinkStatus]:
        with self._lock:
            return dict(self._status)

    def __contains__(self, link_id: int) -> bool:
        return link_id in self._status


def set_link_status(store: LinkStatusStore, link_id: int, status: LinkStatus) -> LinkStatusStore:
    store.set(link_id, status)
    return store


@dataclass(frozen=True)
class RepairList:
    segments: tuple[IPv6Address, ...]
    link_id: int = 0

    def __post_init__(self):
        segs = tuple(IPv6Address(s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("repair list must contain at least one segment")
        if not 0 <= self.link_id <= 0xFFFFFFFF:
            raise ValueError(f"link_id {self.link_id} is not a 32-bit key")
        if len(segs) > MAX_REPAIR_SEGMENTS:
            warnings.warn(
                f"repair list of {len(segs)} segments exceeds the usual TI-LFA bound of "
                f"{MAX_REPAIR_SEGMENTS}",
                stacklevel=3,
            )

    @property
    def head(self) -> IPv6Address:
        return self.segments[0]


@dataclass(frozen=True)
class Pass:
    pass


@dataclass(frozen=True)
class Encapsulate:
    repair: RepairList


PASS = Pass()
FrrAction = Union[Pass, Encapsulate]


def evaluate_master_frr(pkt: bytes, policy: RepairList, store: LinkStatusStore) -> FrrAction:
    if store.get(policy.link_id) == LinkStatus.UP:
        return PASS
    return Encapsulate(policy)


def evaluate_slave_frr(
    pkt: bytes,
    policy: RepairList,
    last_rx: int | None,
    now: int,
    detection_time: int,
) -> FrrAction:
    """Timestamp-driven variant. ``last_rx=None`` (never refreshed) fails open."""
    if last_rx is None:
        return PASS
    if now < last_rx:
        raise ClockSkew(f"now={now} precedes last_rx={last_rx}")
    if now - last_rx < detection_time:
        return PASS
    return Encapsulate(policy)


def apply_action(pkt: bytes, action: FrrAction, outer_src: IPv6Address) -> bytes:
    """Execute an action: identity for Pass, SRv6 encapsulation otherwise."""
    if isinstance(action, Pass):
        return pkt
    return push_encap(pkt, action.repair.segments, outer_src)


def as_repair_list(segments: Sequence[str | IPv6Address], link_id: int) -> RepairList:
    return RepairList(tuple(IPv6Address(s) for s in segments), link_id)
