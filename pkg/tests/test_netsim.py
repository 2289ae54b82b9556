import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srv6pulse.monitor import SessionState
from srv6pulse.netsim import (
    MS,
    SEC,
    ConfigError,
    Delay,
    OverlappingWindow,
    StressProfile,
    config_from_dict,
    config_to_dict,
    default_cpu_stress,
    inject_failure,
    run,
    two_node_config,
    validate,
    verify_frr,
)
from srv6pulse.netsim.config import BACKUP, Component, parse_duration
from srv6pulse.netsim.sim import EventLoop, Network, SlaveObserver
from srv6pulse.reflector import PathRecord
from srv6pulse.wire import ProbeTlv, build_probe, decapsulate, decode_probe

from .conftest import A_LO, B_SLAVE

UP, DOWN = SessionState.UP, SessionState.DOWN


def frr_violations(report, windows):
    """Problems with the FRR record stream, empty if every rule holds.

    Rules: no reroute before the filter's own role has detected the failure,
    rerouted packets decode to the repair head with the original packet
    inside, and pass-through packets leave untouched.
    """
    sess = report.session()
    first_down = {
        "map": [t.timestamp_ns for t in sess.master.transitions if t.new_state is DOWN],
        "timestamp": [t.timestamp_ns for t in sess.slave.transitions if t.new_state is DOWN],
    }
    problems = []
    for r in report.frr_records:
        if not r.rerouted:
            if r.packet_out != r.packet_in:
                problems.append(f"{r.timestamp}: pass-through altered")
            continue
        downs = [t for t in first_down[r.variant] if t <= r.timestamp]
        if not downs:
            problems.append(f"{r.timestamp}: {r.variant} rerouted before any detection")
        if not any(s <= r.timestamp for s, _ in windows):
            problems.append(f"{r.timestamp}: rerouted before the failure")
        outer, srh, inner = decapsulate(r.packet_out)
        if outer.destination != BACKUP or srh.travel_order()[0] != BACKUP:
            problems.append(f"{r.timestamp}: rerouted packet not headed to repair list")
        if inner != r.packet_in:
            problems.append(f"{r.timestamp}: inner packet altered")
    return problems


class TestEventLoop:
    def test_fifo_on_ties(self):
        loop, out = EventLoop(), []
        for i in range(5):
            loop.at(10, out.append, i)
        loop.at(5, out.append, "first")
        loop.run(100)
        assert out == ["first", 0, 1, 2, 3, 4]

    def test_stops_before_until(self):
        loop, out = EventLoop(), []
        loop.at(10, out.append, 1)
        loop.run(10)
        assert out == [] and loop.pending() == 1


class TestConfig:
    def test_parse_duration(self):
        assert parse_duration("10ms") == 10 * MS
        assert parse_duration("1.5s") == 1_500 * MS
        assert parse_duration(42) == 42
        with pytest.raises(ConfigError):
            parse_duration("ten ms")

    def test_default_stress_profile(self):
        us, dp = sorted(default_cpu_stress(), key=lambda p: p.applies_to.value, reverse=True)
        assert us.applies_to is Component.USERSPACE
        assert (us.hit_probability, us.min_delay, us.max_delay) == (0.3, 0, 60 * MS)
        assert dp.applies_to is Component.DATAPATH
        assert (dp.hit_probability, dp.max_delay) == (0.05, 1 * MS)

    def test_datapath_profile_defaults_to_no_hits(self):
        assert StressProfile(Component.DATAPATH).hit_probability == 0.0

    def test_dict_round_trip(self):
        cfg = two_node_config(5 * MS, seed=3, stress_on="master", traffic_pps=50)
        cfg = inject_failure(cfg, "R2-R3", (10 * SEC, 12 * SEC))
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_error_carries_field_path(self):
        d = config_to_dict(two_node_config())
        d["links"][0]["loss"] = 2
        with pytest.raises(ConfigError) as exc:
            config_from_dict(d)
        assert exc.value.path == "links[0].loss"

    def test_detection_shorter_than_interval(self):
        cfg = two_node_config(10 * MS)
        bad = replace(cfg, sessions=(replace(cfg.sessions[0], detection_time=5 * MS),))
        with pytest.raises(ConfigError) as exc:
            validate(bad)
        assert exc.value.path == "sessions[0].detection_time"

    def test_zero_duration(self):
        with pytest.raises(ConfigError):
            two_node_config(duration=0)

    def test_negative_delay(self):
        cfg = two_node_config()
        bad = replace(cfg, links=(replace(cfg.links[0], one_way_delay=Delay(-1)),))
        with pytest.raises(ConfigError) as exc:
            validate(bad)
        assert exc.value.path == "links[0].one_way_delay"

    def test_window_outside_duration(self):
        with pytest.raises(OverlappingWindow):
            inject_failure(two_node_config(duration=10 * SEC), "R2-R3", (9 * SEC, 11 * SEC))

    def test_overlapping_windows(self):
        cfg = inject_failure(two_node_config(duration=10 * SEC), "R2-R3", (1 * SEC, 3 * SEC))
        with pytest.raises(OverlappingWindow):
            inject_failure(cfg, "R2-R3", (2 * SEC, 4 * SEC))

    def test_unknown_link(self):
        with pytest.raises(ConfigError):
            inject_failure(two_node_config(), "nope", (1, 2))


class TestSlaveObserver:
    def test_down_dated_at_expiry(self):
        o = SlaveObserver(1, 30)
        o.refresh(0)
        o.refresh(100)
        assert [(t.timestamp_ns, t.new_state) for t in o.transitions] == [(0, UP), (30, DOWN), (100, UP)]

    def test_refresh_within_d_is_quiet(self):
        o = SlaveObserver(1, 30)
        for t in range(0, 300, 29):
            o.refresh(t)
        assert len(o.transitions) == 1

    def test_finish_closes_open_gap(self):
        o = SlaveObserver(1, 30)
        o.refresh(0)
        o.finish(100)
        assert o.transitions[-1].new_state is DOWN


class TestRun:
    def test_determinism(self):
        cfg = two_node_config(5 * MS, seed=11, duration=20 * SEC, stress_on="master", loss=0.01)
        a, b = run(cfg), run(cfg)
        assert a == b
        assert a.session().master.false_positives > 0

    def test_seed_changes_outcome(self):
        mk = lambda s: two_node_config(5 * MS, seed=s, duration=20 * SEC, stress_on="master")
        assert run(mk(1)).session().master.transitions != run(mk(2)).session().master.transitions

    def test_conservation(self):
        cfg = two_node_config(5 * MS, seed=2, duration=10 * SEC, loss=0.05, traffic_pps=200)
        cfg = inject_failure(cfg, "R2-R3", (3 * SEC, 4 * SEC))
        cfg = replace(cfg, links=(replace(cfg.links[0], one_way_delay=Delay(1 * MS, 3 * MS)),))
        rep = run(cfg)
        c = rep.links["R2-R3"]
        assert c.reconciles()
        assert c.lost > 0 and c.dropped_failure > 0
        assert c.injected == c.delivered + c.lost + c.dropped_failure + c.in_flight

    def test_ideal_short_run(self):
        rep = run(two_node_config(5 * MS, duration=30 * SEC))
        s = rep.session()
        assert s.master.false_positives == 0 and s.slave.false_positives == 0
        assert [t.new_state for t in s.master.transitions] == [UP]
        assert s.loopbacks == s.probes_sent or s.probes_sent - s.loopbacks <= 1

    def test_session_comes_up_within_one_rtt(self):
        rep = run(two_node_config(10 * MS, duration=1 * SEC))
        (up,) = rep.session().master.transitions
        assert up.timestamp_ns == 2 * 50_000

    def test_transitions_alternate_under_stress(self):
        rep = run(two_node_config(5 * MS, seed=4, duration=30 * SEC, stress_on="master"))
        for role in ("master", "slave"):
            states = [t.new_state for t in rep.session().role(role).transitions]
            assert all(a is not b for a, b in zip(states, states[1:]))
            assert states[0] is UP

    def test_trace_lines_are_probe_bytes(self):
        cfg = replace(two_node_config(10 * MS, duration=100 * MS), trace=True)
        rep = run(cfg)
        assert rep.trace
        ts, direction, hexbytes = rep.trace[0].split()
        assert (ts, direction) == ("0", "R2>R3")
        data = bytes.fromhex(hexbytes)
        assert data == build_probe(A_LO, B_SLAVE, A_LO, ProbeTlv(1, 0, 0, 10)).encode()
        for line in rep.trace:
            raw = bytes.fromhex(line.split()[2])
            assert decode_probe(raw).encode() == raw


@pytest.fixture(scope="module")
def failure_report():
    cfg = two_node_config(10 * MS, duration=320 * SEC)
    return run(inject_failure(cfg, "R2-R3", (300 * SEC, 310 * SEC)))


@pytest.fixture(scope="module")
def frr_report():
    cfg = two_node_config(10 * MS, duration=30 * SEC, traffic_pps=100)
    return verify_frr(inject_failure(cfg, "R2-R3", (10 * SEC, 20 * SEC)))


class TestEviction:
    def test_idle_foreign_record_evicted_session_record_kept(self):
        cfg = inject_failure(two_node_config(10 * MS, duration=5 * SEC), "R2-R3", (1 * SEC, 4 * SEC))
        net = Network(cfg)
        rt = net.sessions[0]
        rt.reflector.state[b"foreign"] = PathRecord((A_LO,), 99, last_update=0, last_ack=1)
        net.run()
        assert b"foreign" not in rt.reflector.state
        assert rt.key in rt.reflector.state


class TestInjectFailure:
    def test_one_true_detection_each(self, failure_report):
        s = failure_report.session()
        for role in (s.master, s.slave):
            assert role.true_detections == 1
            assert role.false_positives == 0

    def test_detection_latency_bound(self, failure_report):
        s = failure_report.session()
        bound = 30 * MS + 10 * MS + 2 * 50_000
        assert 0 < s.master.max_latency <= bound
        assert 0 < s.slave.max_latency <= bound

    def test_recovery_bound(self, failure_report):
        (rec,) = failure_report.session().master.recovery_latencies
        assert 0 <= rec <= 10 * MS + 2 * 50_000


class TestVerifyFrr:
    def test_counts_near_window_times_rate(self, frr_report):
        s = frr_report.session()
        for n in (s.rerouted_map, s.rerouted_timestamp):
            assert 990 <= n <= 1001

    def test_rules_hold(self, frr_report):
        assert frr_violations(frr_report, [(10 * SEC, 20 * SEC)]) == []

    def test_timestamp_variant_writes_no_store(self, frr_report):
        recs = [r for r in frr_report.frr_records if r.variant == "timestamp" and r.rerouted]
        assert recs and all(r.node == "R3" for r in recs)

    def test_no_failure_no_reroute(self):
        rep = verify_frr(two_node_config(10 * MS, duration=5 * SEC, traffic_pps=100))
        assert rep.rerouted_packets == 0
        assert all(r.packet_in == r.packet_out for r in rep.frr_records)

    def test_requires_traffic(self):
        with pytest.raises(ConfigError):
            verify_frr(two_node_config(duration=SEC))


class TestProperties:
    @settings(max_examples=15, deadline=None)
    @given(
        st.integers(1, 40),
        st.integers(0, 2_000),
        st.integers(3, 5),
        st.integers(0, 2**32),
    )
    def test_ideal_never_flaps(self, interval_ms, owd_us, mult, seed):
        interval = interval_ms * MS
        owd = owd_us * 1000
        if 2 * owd >= interval:
            return
        rep = run(two_node_config(interval, mult * interval, seed=seed, duration=3 * SEC, one_way_delay=owd))
        s = rep.session()
        assert s.master.false_positives == 0 == s.slave.false_positives

    @pytest.mark.parametrize("p,max_ms", [(0.3, 60), (0.1, 40), (0.5, 25)])
    def test_slave_not_worse_under_same_schedule(self, p, max_ms):
        profiles = (
            StressProfile(Component.USERSPACE, p, 0, max_ms * MS),
            StressProfile(Component.DATAPATH, 0.05, 0, 1 * MS),
        )
        for interval in (5, 10):
            fps = {}
            for role in ("master", "slave"):
                cfg = two_node_config(interval * MS, seed=5, duration=30 * SEC, stress_on=role, stress=profiles)
                fps[role] = run(cfg).session().role(role).false_positives
            assert fps["slave"] <= fps["master"], (interval, fps)

    def test_scale_down_consistency(self):
        # the half-length run is a prefix of the full one, so compare the
        # halves against a binomial split of the total
        cfg = two_node_config(10 * MS, seed=8, duration=120 * SEC, stress_on="master")
        full = run(cfg).session().master.false_positives
        half = run(replace(cfg, duration=60 * SEC)).session().master.false_positives
        assert full > 50
        sd = math.sqrt(full * 0.25)
        assert abs(half - full / 2) <= 4 * sd, (half, full)
