"""Text field dumps of SRv6 packets and SRHs, and their inverse.

One ``key=value`` per line. ``decode_to_fields`` and ``encode_from_fields``
are inverses for any header the codec accepts.
"""

from __future__ import annotations

import re
from ipaddress import IPv6Address

from ..wire import (
    IPV6_HEADER_LEN,
    NH_ROUTING,
    InvariantViolation,
    Ipv6Header,
    ProbeTlv,
    RawTlv,
    SegmentRoutingHeader,
    WireError,
    decode_srh_at,
    encode_srh,
)


class FieldFileError(ValueError):
    pass


def detect_layer(data: bytes) -> str:
    if len(data) >= IPV6_HEADER_LEN and data[0] >> 4 == 6 and data[6] == NH_ROUTING:
        return "packet"
    return "srh"


def _srh_fields(srh: SegmentRoutingHeader) -> list[str]:
    out = [
        f"srh.next_header={srh.next_header}",
        f"srh.hdr_ext_len={srh.hdr_ext_len}",
        f"srh.routing_type={srh.routing_type}",
        f"srh.segments_left={srh.segments_left}",
        f"srh.last_entry={srh.last_entry}",
        f"srh.flags={srh.flags}",
        f"srh.tag={srh.tag}",
    ]
    out += [f"srh.segment[{i}]={seg}" for i, seg in enumerate(srh.segments)]
    for i, t in enumerate(srh.tlvs):
        p = f"srh.tlv[{i}]"
        if isinstance(t, ProbeTlv):
            out += [
                f"{p}.type=0x{t.type:02x}",
                f"{p}.session_id={t.session_id}",
                f"{p}.seq={t.seq}",
                f"{p}.ack={t.ack}",
                f"{p}.interval_ms={t.interval_ms}",
                f"{p}.reserved={t.reserved.hex()}",
            ]
        else:
            out += [f"{p}.type=0x{t.type:02x}", f"{p}.value={t.value.hex()}"]
    return out


def decode_to_fields(data: bytes, layer: str = "auto") -> list[str]:
    if layer == "auto":
        layer = detect_layer(data)
    if layer == "srh":
        srh, end = decode_srh_at(data, 0)
        lines = ["layer=srh", *_srh_fields(srh)]
        if end < len(data):
            lines.append(f"trailer={bytes(data[end:]).hex()}")
        return lines
    if layer != "packet":
        raise ValueError(f"unknown layer {layer!r}")
    hdr = Ipv6Header.decode(data)
    if hdr.next_header != NH_ROUTING:
        raise InvariantViolation(f"next header {hdr.next_header} at offset 6, expected 43", 6)
    srh, end = decode_srh_at(data, IPV6_HEADER_LEN)
    lines = [
        "layer=packet",
        f"ipv6.version={hdr.version}",
        f"ipv6.traffic_class={hdr.traffic_class}",
        f"ipv6.flow_label={hdr.flow_label}",
        f"ipv6.payload_length={hdr.payload_length}",
        f"ipv6.next_header={hdr.next_header}",
        f"ipv6.hop_limit={hdr.hop_limit}",
        f"ipv6.source={hdr.source}",
        f"ipv6.destination={hdr.destination}",
        *_srh_fields(srh),
    ]
    if end < len(data):
        lines.append(f"payload={bytes(data[end:]).hex()}")
    return lines


_KEY = re.compile(r"^srh\.(segment|tlv)\[(\d+)\](?:\.(\w+))?$")


def _int(v: str, key: str) -> int:
    try:
        return int(v, 0)
    except ValueError:
        raise FieldFileError(f"{key}: not an integer: {v!r}") from None


def _hex(v: str, key: str) -> bytes:
    try:
        return bytes.fromhex(v)
    except ValueError:
        raise FieldFileError(f"{key}: malformed hex") from None


def parse_fields(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FieldFileError(f"line {n}: expected key=value")
        k, v = line.split("=", 1)
        fields[k.strip()] = v.strip()
    return fields


def _build_srh(f: dict[str, str]) -> SegmentRoutingHeader:
    segs: dict[int, IPv6Address] = {}
    tlvs: dict[int, dict[str, str]] = {}
    for k, v in f.items():
        m = _KEY.match(k)
        if not m:
            continue
        kind, idx, attr = m.group(1), int(m.group(2)), m.group(3)
        if kind == "segment":
            try:
                segs[idx] = IPv6Address(v)
            except ValueError as e:
                raise FieldFileError(f"{k}: {e}") from None
        else:
            tlvs.setdefault(idx, {})[attr] = v
    if sorted(segs) != list(range(len(segs))):
        raise FieldFileError("srh.segment indices must be contiguous from 0")
    tlv_objs = []
    for idx in sorted(tlvs):
        t = tlvs[idx]
        p = f"srh.tlv[{idx}]"
        ttype = _int(t.get("type", "-1"), f"{p}.type")
        if "value" in t:
            tlv_objs.append(RawTlv(ttype, _hex(t["value"], f"{p}.value")))
        elif ttype == ProbeTlv.type:
            tlv_objs.append(
                ProbeTlv(
                    session_id=_int(t.get("session_id", "0"), f"{p}.session_id"),
                    seq=_int(t.get("seq", "0"), f"{p}.seq"),
                    ack=_int(t.get("ack", "0"), f"{p}.ack"),
                    interval_ms=_int(t.get("interval_ms", "0"), f"{p}.interval_ms"),
                    reserved=_hex(t.get("reserved", "00" * 6), f"{p}.reserved"),
                )
            )
        else:
            tlv_objs.append(RawTlv(ttype, b""))
    srh = SegmentRoutingHeader(
        segments=tuple(segs[i] for i in range(len(segs))),
        segments_left=_int(f.get("srh.segments_left", "0"), "srh.segments_left"),
        tlvs=tuple(tlv_objs),
        next_header=_int(f.get("srh.next_header", "59"), "srh.next_header"),
        flags=_int(f.get("srh.flags", "0"), "srh.flags"),
        tag=_int(f.get("srh.tag", "0"), "srh.tag"),
        routing_type=_int(f.get("srh.routing_type", "4"), "srh.routing_type"),
        last_entry=_int(f.get("srh.last_entry", "-1"), "srh.last_entry"),
    )
    if "srh.hdr_ext_len" in f and _int(f["srh.hdr_ext_len"], "srh.hdr_ext_len") != srh.hdr_ext_len:
        raise InvariantViolation(
            f"hdr_ext_len={f['srh.hdr_ext_len']} but the fields encode to {srh.hdr_ext_len}"
        )
    return srh


def encode_from_fields(text: str) -> bytes:
    f = parse_fields(text)
    layer = f.get("layer", "packet" if "ipv6.source" in f else "srh")
    srh_bytes = encode_srh(_build_srh(f))
    if layer == "srh":
        return srh_bytes + _hex(f.get("trailer", ""), "trailer")
    if layer != "packet":
        raise FieldFileError(f"unknown layer {layer!r}")
    payload = _hex(f.get("payload", ""), "payload")
    try:
        src = IPv6Address(f["ipv6.source"])
        dst = IPv6Address(f["ipv6.destination"])
    except KeyError as e:
        raise FieldFileError(f"missing {e.args[0]}") from None
    except ValueError as e:
        raise FieldFileError(str(e)) from None
    plen = len(srh_bytes) + len(payload)
    if "ipv6.payload_length" in f:
        plen = _int(f["ipv6.payload_length"], "ipv6.payload_length")
    if _int(f.get("ipv6.version", "6"), "ipv6.version") != 6:
        raise InvariantViolation("ipv6.version must be 6")
    hdr = Ipv6Header(
        source=src,
        destination=dst,
        payload_length=plen,
        next_header=_int(f.get("ipv6.next_header", "43"), "ipv6.next_header"),
        hop_limit=_int(f.get("ipv6.hop_limit", "64"), "ipv6.hop_limit"),
        traffic_class=_int(f.get("ipv6.traffic_class", "0"), "ipv6.traffic_class"),
        flow_label=_int(f.get("ipv6.flow_label", "0"), "ipv6.flow_label"),
    )
    return hdr.encode() + srh_bytes + payload


def describe_error(e: WireError) -> str:
    name = type(e).__name__
    if e.offset is not None and f"offset {e.offset}" not in str(e):
        return f"{name}: {e} (at offset {e.offset})"
    return f"{name}: {e}"
