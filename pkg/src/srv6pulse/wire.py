"""IPv6 + Segment Routing Header codec, probe TLV, and SRv6 encapsulation.

Byte layouts follow RFC 8200 (fixed header) and RFC 8754 (SRH). All
multi-octet integers are big-endian.

The segment list is kept in wire order: ``segments[0]`` is the final
segment and ``segments[segments_left]`` is the active one. Helpers that
take "travel order" lists (``build_probe``, ``push_encap``) reverse them.

Probe TLV layout (24 octets, keeps the SRH 8-aligned without padding)::

     0                   1                   2                   3
     0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |  Type (0x81)  |  Length (22)  |     Session ID (high 16)      |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |     Session ID (low 16)       |          SEQ (high 16)        |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |          SEQ (low 16)         |          ACK (high 16)        |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |          ACK (low 16)         |       Interval ms (high 16)   |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |       Interval ms (low 16)    |                               |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+       Reserved (6 octets)     +
    |                                                               |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from ipaddress import IPv6Address
from typing import Sequence, Union

Ipv6Address = IPv6Address

IPV6_HEADER_LEN = 40
SRH_FIXED_LEN = 8
ROUTING_TYPE_SRH = 4
NH_IPV6 = 41
NH_ROUTING = 43
NH_NONE = 59

PROBE_TLV_TYPE = 0x81
PROBE_TLV_LENGTH = 22
PROBE_TLV_SIZE = 2 + PROBE_TLV_LENGTH
PAD1_TYPE = 0

MAX_SRH_LEN = SRH_FIXED_LEN + 255 * 8

_IPV6 = struct.Struct("!IHBB16s16s")
_SRH = struct.Struct("!BBBBBBH")
_PROBE = struct.Struct("!IIII6s")


class WireError(ValueError):
    """Base class for codec failures. ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class Truncated(WireError):
    def __init__(self, offset: int, needed: int | None = None):
        msg = f"Truncated at offset {offset}"
        if needed is not None:
            msg += f" (need {needed} more octets)"
        super().__init__(msg, offset)


class BadRoutingType(WireError):
    pass


class BadEntryCount(WireError):
    pass


class InvariantViolation(WireError):
    pass


class NotIpv6(WireError):
    pass


class NotSrv6(WireError):
    pass


class MissingTlv(WireError):
    pass


class EmptyRepairList(WireError):
    pass


class NoMoreSegments(WireError):
    pass


@dataclass(frozen=True)
class RawTlv:
    """A TLV this codec does not interpret. Type 0 (Pad1) is a lone octet."""

    type: int
    value: bytes = b""

    @property
    def size(self) -> int:
        return 1 if self.type == PAD1_TYPE else 2 + len(self.value)

    def encode(self) -> bytes:
        if not 0 <= self.type <= 0xFF:
            raise InvariantViolation(f"TLV type {self.type} out of range")
        if self.type == PAD1_TYPE:
            if self.value:
                raise InvariantViolation("Pad1 TLV cannot carry a value")
            return b"\x00"
        if len(self.value) > 0xFF:
            raise InvariantViolation(f"TLV value of {len(self.value)} octets exceeds 255")
        return bytes((self.type, len(self.value))) + self.value


@dataclass(frozen=True)
class ProbeTlv:
    session_id: int = 0
    seq: int = 0
    ack: int = 0
    interval_ms: int = 0
    reserved: bytes = bytes(6)

    type = PROBE_TLV_TYPE
    size = PROBE_TLV_SIZE

    def encode(self) -> bytes:
        for name in ("session_id", "seq", "ack", "interval_ms"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFFFFFFFF:
                raise InvariantViolation(f"probe TLV {name}={v} is not a 32-bit unsigned value")
        if len(self.reserved) != 6:
            raise InvariantViolation("probe TLV reserved field must be 6 octets")
        return bytes((PROBE_TLV_TYPE, PROBE_TLV_LENGTH)) + _PROBE.pack(
            self.session_id, self.seq, self.ack, self.interval_ms, self.reserved
        )

    @classmethod
    def decode(cls, value: bytes) -> ProbeTlv:
        session_id, seq, ack, interval_ms, reserved = _PROBE.unpack(value)
        return cls(session_id, seq, ack, interval_ms, reserved)


Tlv = Union[ProbeTlv, RawTlv]


@dataclass(frozen=True)
class Ipv6Header:
    source: IPv6Address
    destination: IPv6Address
    payload_length: int = 0
    next_header: int = NH_ROUTING
    hop_limit: int = 64
    traffic_class: int = 0
    flow_label: int = 0
    version: int = 6

    def encode(self) -> bytes:
        if self.version != 6:
            raise InvariantViolation(f"IPv6 version must be 6, got {self.version}")
        if not 0 <= self.traffic_class <= 0xFF or not 0 <= self.flow_label <= 0xFFFFF:
            raise InvariantViolation("traffic class or flow label out of range")
        if not 0 <= self.payload_length <= 0xFFFF:
            raise InvariantViolation(f"payload length {self.payload_length} out of range")
        first = (6 << 28) | (self.traffic_class << 20) | self.flow_label
        return _IPV6.pack(
            first,
            self.payload_length,
            self.next_header,
            self.hop_limit,
            self.source.packed,
            self.destination.packed,
        )

    @classmethod
    def decode(cls, data: bytes, offset: int = 0) -> Ipv6Header:
        if len(data) - offset < IPV6_HEADER_LEN:
            raise Truncated(len(data), IPV6_HEADER_LEN - (len(data) - offset))
        first, plen, nh, hlim, src, dst = _IPV6.unpack_from(data, offset)
        version = first >> 28
        if version != 6:
            raise NotIpv6(f"version nibble is {version}, expected 6", offset)
        return cls(
            source=IPv6Address(src),
            destination=IPv6Address(dst),
            payload_length=plen,
            next_header=nh,
            hop_limit=hlim,
            traffic_class=(first >> 20) & 0xFF,
            flow_label=first & 0xFFFFF,
        )


@dataclass(frozen=True)
class SegmentRoutingHeader:
    segments: tuple[IPv6Address, ...]
    segments_left: int
    tlvs: tuple[Tlv, ...] = ()
    next_header: int = NH_NONE
    flags: int = 0
    tag: int = 0
    routing_type: int = ROUTING_TYPE_SRH
    last_entry: int = -1  # -1: derive from the segment list

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "tlvs", tuple(self.tlvs))
        if self.last_entry == -1:
            object.__setattr__(self, "last_entry", len(self.segments) - 1)

    @property
    def size(self) -> int:
        return SRH_FIXED_LEN + 16 * len(self.segments) + sum(t.size for t in self.tlvs)

    @property
    def hdr_ext_len(self) -> int:
        return (self.size - 8) // 8

    @property
    def active_segment(self) -> IPv6Address:
        return self.segments[self.segments_left]

    def travel_order(self) -> list[IPv6Address]:
        return list(reversed(self.segments))

    def probe_tlv(self) -> ProbeTlv | None:
        for t in self.tlvs:
            if isinstance(t, ProbeTlv):
                return t
        return None


def encode_srh(srh: SegmentRoutingHeader) -> bytes:
    if srh.routing_type != ROUTING_TYPE_SRH:
        raise InvariantViolation(f"routing type must be 4, got {srh.routing_type}")
    if not srh.segments:
        raise InvariantViolation("SRH needs at least one segment")
    if srh.last_entry != len(srh.segments) - 1:
        raise InvariantViolation(
            f"last_entry={srh.last_entry} but {len(srh.segments)} segments present"
        )
    if not 0 <= srh.segments_left <= srh.last_entry:
        raise InvariantViolation(
            f"segments_left={srh.segments_left} outside [0, {srh.last_entry}]"
        )
    size = srh.size
    if size % 8:
        raise InvariantViolation(f"SRH size {size} is not a multiple of 8 octets")
    if size > MAX_SRH_LEN:
        raise InvariantViolation(f"SRH size {size} exceeds {MAX_SRH_LEN} octets")
    out = bytearray(
        _SRH.pack(
            srh.next_header,
            (size - 8) // 8,
            srh.routing_type,
            srh.segments_left,
            srh.last_entry,
            srh.flags,
            srh.tag,
        )
    )
    for seg in srh.segments:
        out += seg.packed
    for tlv in srh.tlvs:
        out += tlv.encode()
    return bytes(out)


def _decode_tlvs(data: bytes, start: int, end: int) -> list[Tlv]:
    tlvs: list[Tlv] = []
    i = start
    while i < end:
        t = data[i]
        if t == PAD1_TYPE:
            tlvs.append(RawTlv(PAD1_TYPE))
            i += 1
            continue
        if i + 2 > end:
            raise Truncated(i + 1, i + 2 - end)
        length = data[i + 1]
        if i + 2 + length > end:
            raise Truncated(end, i + 2 + length - end)
        value = bytes(data[i + 2 : i + 2 + length])
        if t == PROBE_TLV_TYPE and length == PROBE_TLV_LENGTH:
            tlvs.append(ProbeTlv.decode(value))
        else:
            tlvs.append(RawTlv(t, value))
        i += 2 + length
    return tlvs


def decode_srh_at(data: bytes, offset: int = 0) -> tuple[SegmentRoutingHeader, int]:
    """Decode an SRH starting at ``offset``; return it with the offset just past it."""
    avail = len(data) - offset
    if avail < SRH_FIXED_LEN:
        raise Truncated(len(data), SRH_FIXED_LEN - avail)
    nh, ext_len, rtype, sl, last_entry, flags, tag = _SRH.unpack_from(data, offset)
    if rtype != ROUTING_TYPE_SRH:
        raise BadRoutingType(f"routing type {rtype} at offset {offset + 2}, expected 4", offset + 2)
    total = SRH_FIXED_LEN + 8 * ext_len
    if avail < total:
        raise Truncated(len(data), total - avail)
    seg_bytes = 16 * (last_entry + 1)
    if seg_bytes > 8 * ext_len:
        raise BadEntryCount(
            f"last_entry={last_entry} needs {seg_bytes} octets, header has {8 * ext_len}",
            offset + 4,
        )
    if sl > last_entry:
        raise InvariantViolation(
            f"segments_left={sl} exceeds last_entry={last_entry}", offset + 3
        )
    pos = offset + SRH_FIXED_LEN
    segments = tuple(
        IPv6Address(bytes(data[pos + 16 * k : pos + 16 * (k + 1)])) for k in range(last_entry + 1)
    )
    tlvs = _decode_tlvs(data, pos + seg_bytes, offset + total)
    srh = SegmentRoutingHeader(
        segments=segments,
        segments_left=sl,
        tlvs=tuple(tlvs),
        next_header=nh,
        flags=flags,
        tag=tag,
        routing_type=rtype,
        last_entry=last_entry,
    )
    return srh, offset + total


def decode_srh(data: bytes) -> SegmentRoutingHeader:
    """Decode an SRH at the start of ``data``. Octets past the header are ignored."""
    return decode_srh_at(data, 0)[0]


@dataclass(frozen=True)
class ProbePacket:
    outer: Ipv6Header
    srh: SegmentRoutingHeader

    @property
    def tlv(self) -> ProbeTlv:
        t = self.srh.probe_tlv()
        if t is None:
            raise MissingTlv("SRH carries no probe TLV")
        return t

    @property
    def size(self) -> int:
        return IPV6_HEADER_LEN + self.srh.size

    def encode(self) -> bytes:
        if self.outer.payload_length != self.srh.size:
            raise InvariantViolation(
                f"payload_length={self.outer.payload_length} but SRH is {self.srh.size} octets"
            )
        return self.outer.encode() + encode_srh(self.srh)


def decode_probe(data: bytes) -> ProbePacket:
    outer = Ipv6Header.decode(data)
    if outer.next_header != NH_ROUTING:
        raise NotSrv6(f"next header {outer.next_header} at offset 6, expected 43", 6)
    if outer.payload_length != len(data) - IPV6_HEADER_LEN:
        if outer.payload_length > len(data) - IPV6_HEADER_LEN:
            raise Truncated(len(data), outer.payload_length - (len(data) - IPV6_HEADER_LEN))
        raise InvariantViolation(
            f"payload_length={outer.payload_length} but {len(data) - IPV6_HEADER_LEN} octets follow",
            4,
        )
    srh, end = decode_srh_at(data, IPV6_HEADER_LEN)
    if end != len(data):
        raise InvariantViolation(f"{len(data) - end} trailing octets after SRH", end)
    probes = [t for t in srh.tlvs if isinstance(t, ProbeTlv)]
    if len(probes) != 1:
        raise MissingTlv(f"expected exactly one probe TLV, found {len(probes)}", IPV6_HEADER_LEN)
    if outer.destination != srh.active_segment:
        raise InvariantViolation(
            f"destination {outer.destination} is not the active segment {srh.active_segment}", 24
        )
    return ProbePacket(outer, srh)


def build_probe(
    src: IPv6Address,
    slave_segment: IPv6Address,
    return_segment: IPv6Address,
    tlv: ProbeTlv,
    hop_limit: int = 64,
) -> ProbePacket:
    srh = SegmentRoutingHeader(
        segments=(return_segment, slave_segment),
        segments_left=1,
        tlvs=(tlv,),
    )
    outer = Ipv6Header(
        source=src,
        destination=slave_segment,
        payload_length=srh.size,
        hop_limit=hop_limit,
    )
    return ProbePacket(outer, srh)


def advance_segment(pkt: ProbePacket) -> ProbePacket:
    """SRv6 End behaviour: decrement segments_left and retarget the destination."""
    old = pkt.srh
    sl = old.segments_left
    if sl == 0:
        raise NoMoreSegments("segments_left is already 0")
    srh = SegmentRoutingHeader(
        old.segments, sl - 1, old.tlvs, old.next_header, old.flags, old.tag,
        old.routing_type, old.last_entry,
    )
    o = pkt.outer
    outer = Ipv6Header(
        o.source, old.segments[sl - 1], o.payload_length, o.next_header,
        o.hop_limit, o.traffic_class, o.flow_label, o.version,
    )
    return ProbePacket(outer, srh)


def push_encap(
    inner: bytes,
    repair: Sequence[IPv6Address],
    outer_src: IPv6Address,
    hop_limit: int = 64,
) -> bytes:
    """Encapsulate ``inner`` in an outer IPv6 header + SRH steering it along ``repair``.

    ``repair`` is in travel order; the packet is first sent to ``repair[0]``.
    """
    if not inner or inner[0] >> 4 != 6:
        raise NotIpv6("inner packet is not IPv6", 0)
    if not repair:
        raise EmptyRepairList("repair list is empty")
    srh = SegmentRoutingHeader(
        segments=tuple(reversed(repair)),
        segments_left=len(repair) - 1,
        next_header=NH_IPV6,
    )
    srh_bytes = encode_srh(srh)
    outer = Ipv6Header(
        source=outer_src,
        destination=repair[0],
        payload_length=len(srh_bytes) + len(inner),
        next_header=NH_ROUTING,
        hop_limit=hop_limit,
    )
    return outer.encode() + srh_bytes + bytes(inner)


def decapsulate(packet: bytes) -> tuple[Ipv6Header, SegmentRoutingHeader, bytes]:
    """Split an SRv6-encapsulated packet into outer header, SRH and inner packet."""
    outer = Ipv6Header.decode(packet)
    if outer.next_header != NH_ROUTING:
        raise NotSrv6(f"next header {outer.next_header}, expected 43", 6)
    srh, end = decode_srh_at(packet, IPV6_HEADER_LEN)
    return outer, srh, bytes(packet[end:])


def make_ipv6_packet(
    src: IPv6Address,
    dst: IPv6Address,
    payload: bytes = b"",
    next_header: int = NH_NONE,
    hop_limit: int = 64,
    flow_label: int = 0,
) -> bytes:
    """Plain IPv6 packet with an opaque payload, used as FRR test traffic."""
    hdr = Ipv6Header(
        source=src,
        destination=dst,
        payload_length=len(payload),
        next_header=next_header,
        hop_limit=hop_limit,
        flow_label=flow_label,
    )
    return hdr.encode() + payload


__all__ = [
    "Ipv6Address",
    "Ipv6Header",
    "SegmentRoutingHeader",
    "ProbeTlv",
    "RawTlv",
    "ProbePacket",
    "WireError",
    "Truncated",
    "BadRoutingType",
    "BadEntryCount",
    "InvariantViolation",
    "NotIpv6",
    "NotSrv6",
    "MissingTlv",
    "EmptyRepairList",
    "NoMoreSegments",
    "encode_srh",
    "decode_srh",
    "decode_srh_at",
    "decode_probe",
    "build_probe",
    "advance_segment",
    "push_encap",
    "decapsulate",
    "make_ipv6_packet",
]
