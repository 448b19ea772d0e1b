import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from normdiff.dynamics import ArraySink, Steps, make_rng, run
from normdiff.graphs import WeightedGraph, cycle, line
from normdiff.model import ModelParams, PayoffMatrix, all_b
from normdiff.schedulers import (AdversarialScheduler, ContagionScheduler, PeriodicScheduler,
                                 RandomScheduler, adversary_step, b_fair_check,
                                 empirical_individual_fairness, fairness_whp_estimate, next_vertex,
                                 observe, segment_rounds)

PAY = PayoffMatrix(3, 2, 0, 0)


def trace_of(sched, n, steps, seed=0, graph=None, beta=0.0):
    graph = graph or WeightedGraph(n)
    sink = ArraySink(fields=("vertex", "post"))
    run(graph, PAY, all_b(n), sched, ModelParams(beta), Steps(steps), make_rng(seed), sink=sink)
    return sink.array("vertex")


def test_random_scheduler_uniform():
    t = trace_of(RandomScheduler(), 4, 40_000)
    freq = np.bincount(t, minlength=4) / t.size
    # 4 sigma of a binomial proportion
    assert np.all(np.abs(freq - 0.25) < 4 * math.sqrt(0.25 * 0.75 / t.size))


def test_contagion_line_three_way():
    g = line(5)
    sched = ContagionScheduler.neighbor_walk(g)
    assert g.labels[sched.start] == 0
    rng = make_rng(3)
    counts = np.zeros(5)
    for _ in range(30_000):
        state = sched.initial_state(5)
        counts[next_vertex(sched, state, all_b(5), rng)] += 1
    freq = counts / counts.sum()
    assert freq[0] == 0 and freq[4] == 0
    assert np.allclose(freq[1:4], 1 / 3, atol=0.015)


def test_round_robin_sequence():
    t = trace_of(PeriodicScheduler.round_robin(5, [2, 0, 1, 3, 4]), 5, 10)
    assert t.tolist() == [2, 0, 1, 3, 4] * 2


def test_periodic_rejects_uncovered_vertex():
    with pytest.raises(ValueError, match="support"):
        PeriodicScheduler(np.array([[0.5, 0.5, 0.0]]))


def test_adversary_hammer_count():
    assert AdversarialScheduler.identity(10, 0.3).hammer_count == 4
    assert AdversarialScheduler.containing(10, 0.3).hammer_count == 8


def test_adversary_moves_on_when_vertex_plays_b():
    sched = AdversarialScheduler.identity(4, 0.3)
    state = sched.initial_state(4)
    cfg = all_b(4)
    assert adversary_step(sched, state, cfg) == 0
    observe(sched, state, cfg, 0)
    assert adversary_step(sched, state, cfg) == 1


def test_adversary_repeats_while_a():
    sched = AdversarialScheduler.identity(4, 0.3)
    state = sched.initial_state(4)
    cfg = np.array([1, 0, 0, 0], dtype=np.int8)
    observe(sched, state, cfg, 0)
    assert adversary_step(sched, state, cfg) == 0


def test_adversary_pass_length_on_edgeless_graph():
    # no edges: every update is a fair coin, so a hammered vertex needs
    # a geometric number of updates with mean 2; pass length mean 4*2 + 6
    n, passes = 10, 4000
    sched = AdversarialScheduler.identity(n, 0.3)
    t = trace_of(sched, n, passes * 14)
    mean_pass = t.size / max(1, np.count_nonzero(np.diff(t) < 0))
    assert mean_pass == pytest.approx(14, rel=0.03)


def test_adversary_cap_counts_events():
    g = WeightedGraph(3)
    sched = AdversarialScheduler(0.3, (0, 1, 2), cap=0)
    res = run(g, PAY, all_b(3), sched, ModelParams(0.0), Steps(3000), make_rng(1))
    assert res.state.capped > 0


def test_segment_rounds_example():
    r = segment_rounds(np.array([1, 2, 2, 3, 2, 1, 3]) - 1, 3)
    assert r.lengths.tolist() == [4, 3] and r.tail == 0


def test_segment_rounds_round_robin():
    r = segment_rounds(np.tile(np.arange(6), 5), 6)
    assert np.all(r.lengths == 6)


def test_random_round_length_coupon_collector():
    n = 16
    t = trace_of(RandomScheduler(), n, 10_000 * 60, seed=5)
    r = segment_rounds(t, n)
    expected = n * sum(1 / k for k in range(1, n + 1))
    assert r.lengths.size > 10_000 * 0.9
    assert r.lengths.mean() == pytest.approx(expected, rel=0.1)


def test_b_fair():
    n = 5
    rr = np.tile(np.arange(n), 4)
    assert b_fair_check(rr, n, 1)
    skip = np.array([0, 1, 2, 4] * 3 + [3] + list(range(n)))
    assert not b_fair_check(skip, n, 1)
    doubled = np.tile(np.array([0, 0, 1, 2, 3, 4]), 4)
    assert b_fair_check(doubled, n, 2)
    with pytest.raises(ValueError):
        b_fair_check(np.arange(3), 5, 1)


def test_fairness_random_nlogn():
    rep = fairness_whp_estimate(RandomScheduler(), "nlogn", 32, 2000, seed=2)
    assert rep.tail[4.0] < 0.05
    assert rep.c_estimate == pytest.approx(1.0, abs=0.1)


def test_fairness_round_robin_exact():
    sched = PeriodicScheduler.round_robin(8)
    rep = fairness_whp_estimate(sched, "n", 8, 200)
    assert rep.g_hat(1.001) == 0
    # every vertex is certain to appear in each block of m = n steps
    assert rep.c_estimate == pytest.approx(sched.individual_fairness()) == 8


def test_fairness_needs_rounds():
    with pytest.raises(ValueError):
        fairness_whp_estimate(RandomScheduler(), "n", 8, 10)


def test_adversary_round_profile_on_cycle():
    g = cycle(16)
    sched = AdversarialScheduler.identity(16, 0.5)
    rep = fairness_whp_estimate(sched, "nlogn", 16, 2000, graph=g, payoff=PAY, beta=2.0, seed=4)
    assert rep.g_hat(8) < 0.01
    gs = [rep.g_hat(e) for e in (1, 2, 4, 8)]
    assert all(a >= b for a, b in zip(gs, gs[1:]))


def test_periodic_individual_fairness_contract():
    sched = PeriodicScheduler.uniform_sets(4, [[0, 1], [1, 2, 3]])
    C = sched.individual_fairness()
    t = trace_of(sched, 4, 40_000)
    emp = empirical_individual_fairness(t, 4, sched.m)
    assert emp >= C - 0.05


def _random_kernel(n, rng, density):
    support = rng.random((n, n)) < density
    support = support | support.T
    np.fill_diagonal(support, True)
    D = support * rng.random((n, n))
    return D / D.sum(axis=1, keepdims=True)


@given(st.integers(2, 6), st.integers(0, 10**6))
def test_contagion_validation(n, seed):
    rng = np.random.default_rng(seed)
    D = _random_kernel(n, rng, 0.5)
    support = D > 0
    from scipy.sparse.csgraph import connected_components
    ok = connected_components(support, directed=True, connection="strong")[0] == 1
    if ok:
        ContagionScheduler(D)
        # break v in supp(D_v)
        bad = D.copy()
        bad[0, 0] = 0
        bad[0] /= bad[0].sum() if bad[0].sum() > 0 else 1
        if bad[0].sum() > 0:
            with pytest.raises(ValueError):
                ContagionScheduler(bad)
    else:
        with pytest.raises(ValueError, match="strongly connected"):
            ContagionScheduler(D)


def test_contagion_rejects_asymmetric_support():
    D = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    with pytest.raises(ValueError, match="reversible"):
        ContagionScheduler(D)


def test_replay_determinism():
    g = cycle(10)
    sched = ContagionScheduler.neighbor_walk(g)
    a = trace_of(sched, 10, 5000, seed=9, graph=g, beta=1.0)
    b = trace_of(sched, 10, 5000, seed=9, graph=g, beta=1.0)
    assert np.array_equal(a, b)
