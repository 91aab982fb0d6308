import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relayplan.channel import link_models
from relayplan.queue import (CausalityError, RatePlan, evolve_queue, export_trace, greedy_arrays,
                             greedy_rates, packet_delay_replay)
from relayplan.scenario import ScenarioParams, Trajectory
from relayplan.tables import read_table


def oracle_greedy(r_fso, r_rf, cap, dt):
    """Slot-by-slot min recursion written out plainly."""
    n = len(r_fso)
    c_sr, c_rd, q = [], [], 0.0
    for k in range(n):
        out = 0.0
        if k > 0:
            # forward what the buffer and this slot's arrivals allow, admit what fits
            admit = min(r_fso[k], (cap - q) / dt + r_rf[k])
            admit = max(admit, 0.0)
            out = min(r_rf[k], q / dt + admit)
            c_rd.append(out)
        else:
            admit = min(r_fso[0], cap / dt)
        c_sr.append(admit)
        q = q + admit * dt - out * dt
    return np.array(c_sr), np.array(c_rd)


def test_three_slot_example():
    tr = evolve_queue(RatePlan([10, 10, 10], [10, 10]))
    np.testing.assert_array_equal(tr.q_bits, [10, 10, 10])
    assert (tr.throughput_bps, tr.arrival_rate_bps, tr.avg_delay_slots) == (10.0, 10.0, 1.0)
    assert tr.avg_delay_adjusted == 0.0


def test_all_zero_plan():
    tr = evolve_queue(RatePlan(np.zeros(4), np.zeros(3)))
    assert np.all(tr.q_bits == 0) and tr.throughput_bps == 0.0
    assert not tr.delay_defined


def test_single_packet():
    np.testing.assert_array_equal(evolve_queue(RatePlan([10, 0, 0], [10, 0])).q_bits, [10, 0, 0])


def test_causality_violation():
    with pytest.raises(CausalityError, match="slot 2"):
        evolve_queue(RatePlan([1, 0, 0], [5, 0]))


def test_rateplan_validation():
    with pytest.raises(ValueError):
        RatePlan([1, 2], [1, 2])
    with pytest.raises(ValueError):
        RatePlan([1, -2], [1])
    with pytest.raises(ValueError):
        RatePlan([1, math.nan], [1])
    p = RatePlan([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        p.c_sr[0] = 5.0


def test_slot_length_scales_bits():
    tr = evolve_queue(RatePlan([10, 10], [10]), slot_s=0.5)
    np.testing.assert_array_equal(tr.q_bits, [5, 5])
    assert tr.avg_delay_slots == 1.0


def test_greedy_unbounded_fso_dominant():
    r_fso = np.array([9.0, 8.0, 9.0, 7.0])
    r_rf = np.array([3.0, 2.0, 1.0, 4.0])
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, math.inf)
    np.testing.assert_array_equal(c_sr, r_fso)
    np.testing.assert_array_equal(c_rd, r_rf[1:])


def test_greedy_zero_buffer_passes_through():
    r_fso = np.array([9.0, 3.0, 9.0, 2.0])
    r_rf = np.array([5.0, 4.0, 6.0, 4.0])
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, 0.0)
    np.testing.assert_array_equal(c_sr[1:], np.minimum(r_fso, r_rf)[1:])
    q = evolve_queue(RatePlan(c_sr, c_rd)).q_bits
    assert np.all(q == 0)


def test_greedy_matches_oracle_100_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        r_fso = rng.uniform(0, 10, n) * (rng.random(n) > 0.2)
        r_rf = rng.uniform(0, 10, n) * (rng.random(n) > 0.2)
        cap = float(rng.choice([0.0, rng.uniform(0, 30), math.inf]))
        dt = float(rng.choice([1.0, 0.5, 2.0]))
        got = greedy_arrays(r_fso, r_rf, cap, dt)
        want = oracle_greedy(r_fso, r_rf, cap, dt)
        np.testing.assert_array_equal(got[0], want[0])
        np.testing.assert_array_equal(got[1], want[1])


def test_greedy_ten_slot_instance_frozen():
    r_fso = np.array([5, 1, 7, 0, 3, 8, 2, 2, 6, 4], dtype=float)
    r_rf = np.array([2, 6, 1, 3, 9, 0, 4, 5, 1, 7], dtype=float)
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, 6.0)
    np.testing.assert_array_equal(c_sr, [5, 1, 7, 0, 3, 6, 2, 2, 6, 4])
    np.testing.assert_array_equal(c_rd, [6, 1, 3, 6, 0, 4, 5, 1, 7])


def test_greedy_rates_on_trajectory():
    p = ScenarioParams()
    fso, rf = link_models(p)
    traj = Trajectory.hover((1000.0, 0.0), p.num_slots, p.altitude, p.slot_s)
    plan = greedy_rates(traj, fso, rf, p.buffer_bits)
    tr = evolve_queue(plan)
    assert np.all(tr.q_bits <= p.buffer_bits) and tr.throughput_bps > 0


def test_replay_immediate_forwarding():
    pb = 100.0
    st_ = packet_delay_replay(RatePlan([pb] * 5 + [0.0], [pb] * 5), pb)
    assert np.all(st_.delays == 1) and st_.undelivered == 0 and st_.delivered == 5


def test_replay_three_slot_example():
    st_ = packet_delay_replay(RatePlan([10, 10, 10], [10, 10]), 10)
    np.testing.assert_array_equal(st_.delays, [1, 1])
    assert st_.undelivered == 1 and st_.histogram == {1: 2}


def test_replay_no_departures():
    st_ = packet_delay_replay(RatePlan([10, 10, 10], [0, 0]), 5)
    assert st_.delivered == 0 and st_.undelivered == 6 and math.isnan(st_.mean)


def test_replay_bad_packet_size():
    with pytest.raises(ValueError):
        packet_delay_replay(RatePlan([1, 1], [1]), 0)


def test_export_trace(tmp_path):
    plan = RatePlan([10, 10, 10], [10, 10])
    export_trace(tmp_path / "t.csv", plan, evolve_queue(plan))
    header, rows = read_table(tmp_path / "t.csv")
    assert header == ["slot", "c_sr_bps", "c_rd_bps", "q_bits"]
    assert rows == [[1, 10, 0, 10], [2, 10, 10, 10], [3, 10, 10, 10]]


rates = st.lists(st.floats(0, 1e3), min_size=2, max_size=40)


@st.composite
def feasible_plans(draw):
    r_fso = np.array(draw(rates))
    r_rf = np.array(draw(st.lists(st.floats(0, 1e3), min_size=r_fso.size, max_size=r_fso.size)))
    cap = draw(st.one_of(st.just(math.inf), st.floats(0, 5e3)))
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, cap)
    # thin the departures to get plans that are not greedy
    keep = np.array(draw(st.lists(st.floats(0, 1), min_size=c_rd.size, max_size=c_rd.size)))
    return RatePlan(c_sr, c_rd * keep), cap


@given(feasible_plans())
def test_conservation_and_causality(args):
    plan, _ = args
    tr = evolve_queue(plan)
    total = float(np.sum(plan.c_sr) - np.sum(plan.c_rd))
    assert abs(tr.q_bits[-1] - total) <= 1e-6 * max(1.0, float(np.sum(plan.c_sr)))
    assert np.all(np.cumsum(plan.c_rd_full()) <= np.cumsum(plan.c_sr) + 1e-9 * max(1.0, np.sum(plan.c_sr)))
    assert np.all(tr.q_bits >= 0)


@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=40),
       st.lists(st.floats(0, 1e3), min_size=40, max_size=40),
       st.one_of(st.just(math.inf), st.floats(0, 5e3)))
def test_greedy_respects_buffer_and_links(r_fso, r_rf, cap):
    r_fso = np.array(r_fso)
    r_rf = np.array(r_rf[: r_fso.size])
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, cap)
    tr = evolve_queue(RatePlan(c_sr, c_rd))
    assert np.all(c_sr <= r_fso) and np.all(c_rd <= r_rf[1:])
    assert np.all(tr.q_bits <= cap * (1 + 1e-12) + 1e-9)


@given(st.floats(1.0, 50.0), st.integers(0, 6), st.integers(60, 200))
def test_littles_law_on_stationary_plans(rate, lag, n):
    """Constant arrivals, departures lagging by ``lag`` slots: both delay measures agree."""
    c_sr = np.full(n, rate)
    c_rd = np.concatenate([np.zeros(lag), np.full(n - 1 - lag, rate)])
    plan = RatePlan(c_sr, c_rd)
    tr = evolve_queue(plan)
    st_ = packet_delay_replay(plan, rate)
    assert abs(tr.avg_delay_slots - st_.mean) <= 1.0
