"""Acceptance gate: the eight criteria at their stated tolerances.

Each test prints one ``ACCEPTANCE <k> PASS|FAIL`` line (visible with or
without ``-s``) and then asserts.
"""
import itertools
from fractions import Fraction

import numpy as np
import pytest

from normdiff import exact
from normdiff.experiments import adversary_containment, p_inertia_mc, pilot_beta, scaling_experiment
from normdiff.graphs import WeightedGraph, close_knit_ratio, complete, cycle, is_rk_close_knit, line
from normdiff.model import ModelParams, PayoffMatrix, all_a, pack, unpack
from normdiff.schedulers import (ContagionScheduler, PeriodicScheduler, RandomScheduler)

PAY32 = PayoffMatrix(3, 2, 0, 0)
PAY21 = PayoffMatrix(2, 1, 0, 0)
BETAS = (0.5, 1.0, 2.0)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def connected_graphs(max_n):
    out = []
    for n in range(2, max_n + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for r in range(n - 1, len(pairs) + 1):
            for edges in itertools.combinations(pairs, r):
                g = WeightedGraph(n, edges)
                if g.is_connected():
                    out.append(g)
    return out


def random_contagion_kernel(n, rng):
    # symmetric support with self loops, strongly connected, random weights
    while True:
        support = rng.random((n, n)) < 0.5
        support = support | support.T
        np.fill_diagonal(support, True)
        D = support * rng.uniform(0.1, 1.0, (n, n))
        D /= D.sum(axis=1, keepdims=True)
        try:
            return ContagionScheduler(D, int(rng.integers(n)))
        except ValueError:
            continue


def test_1_gibbs_stationarity(report):
    graphs = [complete(2), cycle(3), cycle(5), line(5), complete(4)]
    worst = 0.0
    for g in graphs:
        for beta in BETAS:
            mu = exact.stationary(exact.build_chain(g, PAY32, ModelParams(beta)))
            worst = max(worst, float(np.max(np.abs(mu - exact.gibbs(g, PAY32, beta)))))
    ok = worst <= 1e-8
    report(1, ok, f"max L_inf(stationary, gibbs) = {worst:.2e} over 5 graphs x 3 betas (tol 1e-8)")
    assert ok


def test_2_cyclic_schedules(report):
    g = cycle(5)
    scheds = {
        "round-robin": PeriodicScheduler.round_robin(5),
        "two-set": PeriodicScheduler.uniform_sets(5, [[0, 1, 2], [2, 3, 4]]),
    }
    worst, stable = 0.0, {}
    for name, s in scheds.items():
        for beta in BETAS:
            mu = exact.stationary(exact.build_chain(g, PAY32, ModelParams(beta), s))
            worst = max(worst, float(np.max(np.abs(mu - exact.gibbs(g, PAY32, beta)))))
        stable[name] = exact.stable_states(exact.resistance_digraph(g, PAY32, s)).stable
    ok = worst <= 1e-8 and all(v == [pack(all_a(5))] for v in stable.values())
    report(2, ok, f"per-round L_inf = {worst:.2e} (tol 1e-8); stable sets {stable} (all-A = 31)")
    assert ok


def test_3_stochastic_stability(report):
    rng = np.random.default_rng(2024)
    graphs = connected_graphs(4)
    bad = []
    checked = 0
    for g in graphs:
        rep = exact.stable_states(exact.resistance_digraph(g, PAY32))
        if rep.stable != [pack(all_a(g.n))]:
            bad.append((g.edges.tolist(), "random", rep.stable_labels()))
        for _ in range(3):
            sched = random_contagion_kernel(g.n, rng)
            rep = exact.stable_states(exact.resistance_digraph(g, PAY32, sched))
            checked += 1
            if sorted(rep.stable) != sorted(rep.predicted):
                bad.append((g.edges.tolist(), "contagion", rep.stable_labels()))
    ok = not bad
    report(3, ok, f"{len(graphs)} connected graphs (n <= 4), {checked} contagion kernels; mismatches: {bad[:3]}")
    assert ok


def test_4_resistance_rule(report):
    worst = 0.0
    for g in (complete(2), cycle(3)):
        n = g.n
        fam = lambda p, g=g: exact.build_chain(g, PAY32, p)
        for idx in range(1 << n):
            x = unpack(idx, n)
            for j in range(n):
                y = x.copy()
                y[j] ^= 1
                for target in (x, y):
                    r = exact.move_resistance(x, target, j, g, PAY32)
                    fit = exact.fit_move_resistance(g, PAY32, x, target, j)
                    worst = max(worst, abs(fit - r))
                # flip arcs also through the chain itself
                chain_fit = exact.resistance_by_fit(fam, idx, pack(y))
                worst = max(worst, abs(chain_fit - exact.move_resistance(x, y, j, g, PAY32)))
    K2 = complete(2)
    bb, ab, aa = unpack(0, 2), unpack(1, 2), unpack(3, 2)
    triple = (exact.fit_move_resistance(K2, PAY32, bb, ab, 0),
              exact.fit_move_resistance(K2, PAY32, ab, ab, 1),
              exact.fit_move_resistance(K2, PAY32, ab, aa, 1))
    ok = worst <= 0.05 and all(abs(t - e) <= 0.05 for t, e in zip(triple, (2, 3, 0)))
    report(4, ok, f"max |fit - rule| = {worst:.2e} on K_2, C_3; K_2 triple = "
                  f"({triple[0]:.3f}, {triple[1]:.3f}, {triple[2]:.3f}) vs (2, 3, 0)")
    assert ok


def _scaling(family, sizes, gb, sb, seed):
    g0 = gb(sizes[0])
    beta, rates = pilot_beta(g0, PAY21, sb(g0), 0.1, seed=seed)
    assert beta is not None, f"pilot failed: {rates}"
    return scaling_experiment(family, sizes, gb, sb, PAY21, beta, 0.1, replicas=50, seed=seed)


@pytest.mark.slow
def test_5_inertia_scaling(report):
    sizes = [16, 32, 64, 128]
    runs = {
        "cycle/random": _scaling("cycle", sizes, cycle, lambda g: RandomScheduler(), 51),
        "cycle/round-robin": _scaling("cycle", sizes, cycle, lambda g: PeriodicScheduler.round_robin(g.n), 52),
        "line/contagion": _scaling("line", sizes, lambda s: line(2 * s + 1),
                                   lambda g: ContagionScheduler.neighbor_walk(g), 53),
    }
    targets = {"cycle/random": 1.0, "cycle/round-robin": 1.0, "line/contagion": 2.0}
    parts, ok = [], True
    for name, rep in runs.items():
        good = abs(rep.slope - targets[name]) <= 0.3 and rep.usable
        ok &= good
        cens = sum(e.censored for e in rep.estimates)
        parts.append(f"{name} slope {rep.slope:.3f}+-{rep.stderr:.3f} (beta {rep.beta:g}, censored {cens})")
    report(5, ok, "; ".join(parts) + " (targets 1, 1, 2 +- 0.3)")
    assert ok


@pytest.mark.slow
def test_6_adversary_containment(report):
    parts, ok = [], True
    for n in (16, 32):
        for r in (0.3, 0.5):
            rep = adversary_containment(cycle(n), r, 4.0, 10**6, replicas=50, seed=60 + n)
            g8 = rep.g_hat(8)
            good = rep.exceedances == 0 and g8 < 0.01
            ok &= good
            parts.append(f"C_{n} r={r}: exceed={rep.exceedances} max={rep.max_fraction:.3f} g(8)={g8:.1e}")
    report(6, ok, "; ".join(parts))
    assert ok


def _brute_ratio(g, S):
    S = set(S)
    best = None
    for size in range(1, len(S) + 1):
        for sub in itertools.combinations(sorted(S), size):
            sub = set(sub)
            e = sum(1 for h, k in g.edges.tolist() if (h in sub and k in S) or (k in sub and h in S))
            d = int(sum(g.degree[v] for v in sub))
            v = Fraction(e, d)
            best = v if best is None or v < best else best
    return best


def test_7_close_knit_oracle(report):
    g = cycle(20)
    mism = []
    for k in range(2, 9):
        rep = close_knit_ratio(g, range(k))
        want = Fraction(k - 1, 2 * k)
        if Fraction(rep.edges_inside, rep.degree_sum) != want or _brute_ratio(g, range(k)) != want:
            mism.append(k)
    c8 = cycle(8)
    yes = is_rk_close_knit(c8, 0.3, 3, connected_only=False).holds
    no = is_rk_close_knit(c8, 0.4, 3, connected_only=False).holds
    ok = not mism and yes is True and no is False
    report(7, ok, f"segment ratios (k-1)/2k for k=2..8 mismatches {mism}; "
                  f"C_8 (0.3,3)={yes}, (0.4,3)={no}")
    assert ok


def _mc_vs_exact(name, g, pay, sched, beta, p, start_state, seed):
    params = ModelParams(beta)
    per_round = False
    chain = exact.build_chain(g, pay, params, sched, per_round=per_round)
    h = exact.expected_hitting_times(chain, exact.target_mask(chain, int(np.ceil((1 - p) * g.n - 1e-9))))
    ref = float(h[start_state])
    est = p_inertia_mc(g, pay, sched, beta, p, replicas=300, budget=int(200 * ref) + 10_000, seed=seed)
    dev = abs(est.mean - ref)
    return name, ref, est, dev <= 3 * est.half_width and est.censored == 0


def test_8_mc_vs_exact(report):
    c6 = cycle(6)
    l7 = line(7)
    cases = [
        ("K_2 random", complete(2), PAY32, RandomScheduler(), 2.0, 0.4, 0),
        ("C_3 random", cycle(3), PAY32, RandomScheduler(), 1.0, 0.1, 0),
        ("K_4 random", complete(4), PAY32, RandomScheduler(), 1.0, 0.1, 0),
        ("L_5 random", line(5), PAY21, RandomScheduler(), 2.0, 0.1, 0),
        ("C_5 round-robin", cycle(5), PAY21, PeriodicScheduler.round_robin(5), 2.0, 0.1, 0),
        ("L_7 two-set", l7, PAY21, PeriodicScheduler.uniform_sets(7, [[0, 1, 2, 3], [3, 4, 5, 6]]), 2.0, 0.1, 0),
        ("C_6 contagion", c6, PAY21, ContagionScheduler.neighbor_walk(c6, 0), 2.0, 0.1, 0),
        ("C_8 random", cycle(8), PAY32, RandomScheduler(), 2.0, 0.1, 0),
    ]
    results = [_mc_vs_exact(*c, seed=800 + i) for i, c in enumerate(cases)]
    ok = all(r[3] for r in results)
    detail = "; ".join(f"{n}: mc {e.mean:.4g}+-{e.half_width:.2g} vs exact {ref:.4g}"
                       f"{'' if good else ' (MISS)'}" for n, ref, e, good in results)
    report(8, ok, detail)
    assert ok
