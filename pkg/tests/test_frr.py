import threading
import warnings
from ipaddress import IPv6Address

import pytest
from hypothesis import given
from hypothesis import strategies as st

from srv6pulse.frr import (
    PASS,
    ClockSkew,
    Encapsulate,
    LinkStatus,
    LinkStatusStore,
    Pass,
    RepairList,
    apply_action,
    evaluate_master_frr,
    evaluate_slave_frr,
    set_link_status,
)
from srv6pulse.wire import decapsulate, make_ipv6_packet

from .conftest import A_LO, B_LO

MS = 1_000_000
BACKUP = IPv6Address("2001:db8:ffff::1")
POLICY = RepairList((BACKUP, B_LO), link_id=7)
PKT = make_ipv6_packet(A_LO, B_LO, bytes(64))


class TestMasterFrr:
    def test_up_passes(self):
        store = LinkStatusStore({7: LinkStatus.UP})
        assert evaluate_master_frr(PKT, POLICY, store) == PASS

    def test_down_encapsulates(self):
        store = LinkStatusStore({7: LinkStatus.DOWN})
        assert evaluate_master_frr(PKT, POLICY, store) == Encapsulate(POLICY)

    def test_missing_key_fails_open(self):
        assert evaluate_master_frr(PKT, POLICY, LinkStatusStore()) == PASS

    def test_other_link_down_does_not_matter(self):
        store = LinkStatusStore({8: LinkStatus.DOWN})
        assert evaluate_master_frr(PKT, POLICY, store) == PASS


class TestSetLinkStatus:
    def test_down_then_evaluate(self):
        store = set_link_status(LinkStatusStore(), 7, LinkStatus.DOWN)
        assert isinstance(evaluate_master_frr(PKT, POLICY, store), Encapsulate)

    def test_last_write_wins(self):
        store = LinkStatusStore()
        set_link_status(store, 7, LinkStatus.DOWN)
        set_link_status(store, 7, LinkStatus.UP)
        assert evaluate_master_frr(PKT, POLICY, store) == PASS

    def test_idempotent(self):
        a, b = LinkStatusStore(), LinkStatusStore()
        set_link_status(a, 7, LinkStatus.UP)
        set_link_status(b, 7, LinkStatus.UP)
        set_link_status(b, 7, LinkStatus.UP)
        assert a.snapshot() == b.snapshot()

    def test_concurrent_readers_see_whole_values(self):
        store = LinkStatusStore()
        seen = set()
        stop = threading.Event()

        def reader():
            while not stop.is_set():
                seen.add(store.get(7))

        threads = [threading.Thread(target=reader) for _ in range(3)]
        for t in threads:
            t.start()
        for i in range(2000):
            store.set(7, LinkStatus(i % 2))
        stop.set()
        for t in threads:
            t.join()
        assert seen <= {LinkStatus.UP, LinkStatus.DOWN}


class TestSlaveFrr:
    def test_under_threshold(self):
        now = 1_000 * MS
        assert evaluate_slave_frr(PKT, POLICY, now - 29 * MS, now, 30 * MS) == PASS

    def test_over_threshold(self):
        now = 1_000 * MS
        assert evaluate_slave_frr(PKT, POLICY, now - 31 * MS, now, 30 * MS) == Encapsulate(POLICY)

    def test_zero_elapsed(self):
        assert evaluate_slave_frr(PKT, POLICY, 5, 5, 30 * MS) == PASS

    def test_boundary_is_closed(self):
        assert isinstance(evaluate_slave_frr(PKT, POLICY, 0, 30 * MS, 30 * MS), Encapsulate)

    def test_clock_skew(self):
        with pytest.raises(ClockSkew):
            evaluate_slave_frr(PKT, POLICY, 10, 5, 30 * MS)

    def test_never_refreshed_fails_open(self):
        assert evaluate_slave_frr(PKT, POLICY, None, 10**12, 30 * MS) == PASS

    @given(st.integers(0, 10**12), st.integers(0, 10**9), st.integers(1, 10**9))
    def test_deterministic(self, last, elapsed, d):
        a = evaluate_slave_frr(PKT, POLICY, last, last + elapsed, d)
        b = evaluate_slave_frr(PKT, POLICY, last, last + elapsed, d)
        assert a == b
        assert isinstance(a, Pass) == (elapsed < d)


class TestApplyAction:
    def test_pass_is_bit_identical(self):
        out = apply_action(PKT, PASS, A_LO)
        assert out == PKT

    def test_encapsulate_heads_to_repair(self):
        out = apply_action(PKT, Encapsulate(POLICY), A_LO)
        outer, srh, inner = decapsulate(out)
        assert outer.destination == BACKUP
        assert srh.travel_order()[0] == BACKUP
        assert inner == PKT


class TestRepairList:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            RepairList((), 1)

    def test_long_list_warns(self):
        with pytest.warns(UserWarning):
            RepairList(tuple(IPv6Address(f"2001:db8::{i}") for i in range(1, 6)), 1)

    def test_four_is_quiet(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            RepairList(tuple(IPv6Address(f"2001:db8::{i}") for i in range(1, 5)), 1)
