import random
import struct
from ipaddress import IPv6Address

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srv6pulse.wire import (
    BadEntryCount,
    BadRoutingType,
    EmptyRepairList,
    InvariantViolation,
    Ipv6Header,
    MissingTlv,
    NoMoreSegments,
    NotIpv6,
    ProbePacket,
    ProbeTlv,
    RawTlv,
    SegmentRoutingHeader,
    Truncated,
    WireError,
    advance_segment,
    build_probe,
    decapsulate,
    decode_probe,
    decode_srh,
    encode_srh,
    make_ipv6_packet,
    push_encap,
)

from .conftest import A_LO, B_LO, B_SLAVE

addresses = st.builds(IPv6Address, st.integers(0, (1 << 128) - 1))
u32 = st.integers(0, 0xFFFFFFFF)
probe_tlvs = st.builds(ProbeTlv, u32, u32, u32, u32, st.binary(min_size=6, max_size=6))


@st.composite
def raw_tlv_block(draw):
    """Unknown TLVs whose total size is a multiple of 8."""
    tlvs = []
    for _ in range(draw(st.integers(0, 2))):
        n = draw(st.sampled_from([6, 14]))
        tlvs.append(RawTlv(draw(st.integers(1, 255).filter(lambda t: t != 0x81)), draw(st.binary(min_size=n, max_size=n))))
    return tlvs


@st.composite
def srhs(draw, with_probe=None):
    segs = draw(st.lists(addresses, min_size=1, max_size=8))
    tlvs = draw(raw_tlv_block())
    if with_probe if with_probe is not None else draw(st.booleans()):
        tlvs.insert(draw(st.integers(0, len(tlvs))), draw(probe_tlvs))
    return SegmentRoutingHeader(
        segments=segs,
        segments_left=draw(st.integers(0, len(segs) - 1)),
        tlvs=tlvs,
        next_header=draw(st.integers(0, 255)),
        flags=draw(st.integers(0, 255)),
        tag=draw(st.integers(0, 0xFFFF)),
    )


@st.composite
def probe_packets(draw):
    srh = draw(srhs(with_probe=True))
    outer = Ipv6Header(
        source=draw(addresses),
        destination=srh.active_segment,
        payload_length=srh.size,
        hop_limit=draw(st.integers(0, 255)),
        traffic_class=draw(st.integers(0, 255)),
        flow_label=draw(st.integers(0, 0xFFFFF)),
    )
    return ProbePacket(outer, srh)


def two_seg(tlvs=()):
    return SegmentRoutingHeader(segments=(A_LO, B_SLAVE), segments_left=1, tlvs=tlvs)


class TestEncodeSrh:
    def test_two_segments_no_tlv(self):
        data = encode_srh(two_seg())
        assert len(data) == 40
        assert data[1] == 4

    def test_two_segments_probe_tlv(self):
        data = encode_srh(two_seg((ProbeTlv(1, 1, 0, 10),)))
        assert len(data) == 64
        assert data[1] == 7

    def test_single_segment_self_probe(self):
        data = encode_srh(SegmentRoutingHeader(segments=(A_LO,), segments_left=0))
        assert len(data) == 24
        assert data[1] == 2

    def test_first_octet_is_next_header(self):
        assert encode_srh(two_seg())[0] == 59

    def test_layout_hand_trace(self):
        data = encode_srh(two_seg((ProbeTlv(0xDEADBEEF, 5, 4, 10),)))
        assert data[:8] == bytes([59, 7, 4, 1, 1, 0, 0, 0])
        assert data[8:24] == A_LO.packed
        assert data[24:40] == B_SLAVE.packed
        assert data[40:42] == bytes([0x81, 22])
        assert struct.unpack("!IIII", data[42:58]) == (0xDEADBEEF, 5, 4, 10)
        assert data[58:64] == bytes(6)

    def test_misaligned_tlvs_rejected(self):
        with pytest.raises(InvariantViolation):
            encode_srh(two_seg((RawTlv(5, b"abc"),)))

    def test_inconsistent_last_entry_rejected(self):
        with pytest.raises(InvariantViolation):
            encode_srh(SegmentRoutingHeader(segments=(A_LO, B_SLAVE), segments_left=1, last_entry=2))

    def test_segments_left_beyond_last_entry_rejected(self):
        with pytest.raises(InvariantViolation):
            encode_srh(SegmentRoutingHeader(segments=(A_LO, B_SLAVE), segments_left=2))


class TestDecodeSrh:
    def test_probe_srh_hand_trace(self):
        data = encode_srh(two_seg((ProbeTlv(9, 1, 0, 10),)))
        srh = decode_srh(data)
        assert srh.segments == (A_LO, B_SLAVE)
        assert srh.segments_left == 1 and srh.last_entry == 1
        assert srh.tlvs == (ProbeTlv(9, 1, 0, 10),)

    def test_bad_routing_type(self):
        data = bytearray(encode_srh(two_seg()))
        data[2] = 3
        with pytest.raises(BadRoutingType):
            decode_srh(bytes(data))

    def test_truncated_reports_offset(self):
        data = encode_srh(two_seg((ProbeTlv(),)))
        with pytest.raises(Truncated) as exc:
            decode_srh(data[:50])
        assert exc.value.offset == 50
        assert "Truncated at offset 50" in str(exc.value)

    def test_too_short_for_fixed_header(self):
        with pytest.raises(Truncated):
            decode_srh(b"\x3b\x00\x04")

    def test_entry_count_exceeding_header(self):
        data = bytearray(encode_srh(two_seg()))
        data[4] = 2
        with pytest.raises(BadEntryCount):
            decode_srh(bytes(data))

    def test_unknown_tlv_preserved(self):
        srh = two_seg((RawTlv(0x05, bytes(range(6))),))
        assert decode_srh(encode_srh(srh)).tlvs == (RawTlv(0x05, bytes(range(6))),)

    def test_pad1_preserved(self):
        srh = two_seg(tuple(RawTlv(0) for _ in range(8)))
        assert decode_srh(encode_srh(srh)) == srh

    def test_trailing_bytes_ignored(self):
        srh = two_seg()
        assert decode_srh(encode_srh(srh) + b"payload") == srh

    @given(srhs())
    def test_round_trip(self, srh):
        assert decode_srh(encode_srh(srh)) == srh

    @settings(max_examples=500)
    @given(st.binary(max_size=600))
    def test_decoder_totality(self, data):
        try:
            decode_srh(data)
        except WireError:
            pass


class TestProbe:
    def test_build_probe_addressing(self):
        src, slave = IPv6Address("2001:db8::a"), IPv6Address("2001:db8::b5")
        pkt = build_probe(src, slave, src, ProbeTlv(seq=1))
        assert pkt.outer.destination == slave
        assert pkt.outer.source == src
        assert pkt.srh.segments_left == 1 and pkt.srh.last_entry == 1
        assert pkt.srh.segments == (src, slave)
        assert pkt.srh.travel_order() == [slave, src]
        assert pkt.outer.payload_length == 64

    def test_tlv_round_trip(self):
        pkt = build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(seq=1, ack=0))
        back = decode_probe(pkt.encode())
        assert (back.tlv.seq, back.tlv.ack) == (1, 0)
        assert back == pkt

    def test_hop_limit(self):
        assert build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(), hop_limit=64).outer.hop_limit == 64
        assert build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(), hop_limit=7).outer.hop_limit == 7

    def test_probe_size(self):
        assert len(build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv()).encode()) == 104

    def test_missing_tlv(self):
        srh = two_seg()
        pkt = ProbePacket(Ipv6Header(A_LO, B_SLAVE, srh.size), srh)
        with pytest.raises(MissingTlv):
            decode_probe(pkt.encode())

    def test_not_ipv6(self):
        data = bytearray(build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv()).encode())
        data[0] = 0x45
        with pytest.raises(NotIpv6):
            decode_probe(bytes(data))

    @given(probe_packets())
    def test_packet_round_trip(self, pkt):
        data = pkt.encode()
        back = decode_probe(data)
        assert back == pkt
        assert back.encode() == data


class TestAdvanceSegment:
    def test_at_slave(self):
        pkt = build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(seq=3))
        nxt = advance_segment(pkt)
        assert nxt.srh.segments_left == 0
        assert nxt.outer.destination == A_LO

    def test_no_more_segments(self):
        pkt = advance_segment(build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv()))
        with pytest.raises(NoMoreSegments):
            advance_segment(pkt)

    @given(probe_packets())
    def test_touches_only_cursor_and_destination(self, pkt):
        if pkt.srh.segments_left == 0:
            return
        before, after = pkt.encode(), advance_segment(pkt).encode()
        assert len(before) == len(after)
        diff = {i for i, (x, y) in enumerate(zip(before, after)) if x != y}
        assert diff <= set(range(24, 40)) | {43}


class TestPushEncap:
    inner = make_ipv6_packet(A_LO, B_LO, bytes(64))

    def test_size_arithmetic(self):
        assert len(self.inner) == 104
        out = push_encap(self.inner, [IPv6Address("2001:db8:ffff::1"), B_LO], A_LO)
        assert len(out) == 104 + 40 + 40

    def test_empty_repair(self):
        with pytest.raises(EmptyRepairList):
            push_encap(self.inner, [], A_LO)

    def test_not_ipv6(self):
        with pytest.raises(NotIpv6):
            push_encap(b"\x45" + bytes(30), [B_LO], A_LO)

    def test_decapsulation_recovers_inner(self):
        repair = [IPv6Address("2001:db8:ffff::1"), B_LO]
        out = push_encap(self.inner, repair, A_LO)
        assert out[40 + 40 :] == self.inner
        outer, srh, inner = decapsulate(out)
        assert inner == self.inner
        assert outer.destination == repair[0]
        assert outer.next_header == 43 and srh.next_header == 41
        assert srh.travel_order() == repair
        assert srh.segments_left == 1
        assert outer.payload_length == 40 + len(self.inner)

    @given(st.lists(addresses, min_size=1, max_size=6), st.binary(max_size=200))
    def test_adds_exact_overhead(self, repair, payload):
        inner = make_ipv6_packet(A_LO, B_LO, payload)
        out = push_encap(inner, repair, A_LO)
        assert len(out) == len(inner) + 40 + 8 + 16 * len(repair)
        assert out.endswith(inner)


def test_fuzz_mutated_probes_never_crash():
    rng = random.Random(7)
    base = build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(1, 2, 3, 4)).encode()
    for _ in range(3000):
        data = bytearray(base)
        for _ in range(rng.randint(1, 6)):
            data[rng.randrange(len(data))] = rng.randrange(256)
        data = bytes(data[: rng.randint(0, len(data))])
        for fn in (decode_probe, decode_srh, lambda d: decode_srh(d[40:])):
            try:
                fn(data)
            except WireError:
                pass
