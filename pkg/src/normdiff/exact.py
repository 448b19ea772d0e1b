"""Exact small-instance analysis: transition kernels, stationary and Gibbs
distributions, detailed balance, resistances and stochastically stable states.

State spaces
------------
Plain chains index configurations by their packed integer (vertex 0 is the
least significant bit, A = 1). Contagion chains index ``(config, walker)``
as ``config * n + walker``; phase chains for periodic schedulers index
``(config, phase)`` as ``config * m + phase``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import spsolve
from scipy.special import expit, logsumexp

from .arborescence import min_in_tree_weight
from .errors import CapacityError, ReducibleChainError
from .model import POTENTIAL_TOL, ModelParams, potential, to_bitstring, unpack
from .schedulers import (AdversarialScheduler, ContagionScheduler, PeriodicScheduler,
                         RandomScheduler)

MAX_PLAIN_STATES = 16384
MAX_CONTAGION_STATES = 12288
MAX_ROUND_STATES = 4096
DENSE_LIMIT = 2048
STATIONARY_RESIDUAL = 1e-10


def _state_bits(n):
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def all_potentials(graph, payoff):
    """Potential of every configuration, indexed by packed integer."""
    _check_states(1 << graph.n, MAX_PLAIN_STATES, "plain")
    bits = _state_bits(graph.n)
    rho = np.zeros(1 << graph.n)
    m = payoff.matrix
    for (h, k), w in zip(graph.edges, graph.edge_weights):
        rho += w * m[bits[:, h], bits[:, k]]
    return rho


def _check_states(count, bound, what):
    if count > bound:
        raise CapacityError(f"{what} state space has {count} states, exceeding the bound {bound}")


def _free_mask(n, restricted):
    if restricted is None:
        return np.ones(n, dtype=bool)
    free = np.zeros(n, dtype=bool)
    free[sorted({int(v) for v in restricted})] = True
    return free


def _payoff_gaps(graph, payoff):
    """``nu_A - nu_B`` for every (configuration, vertex)."""
    bits = _state_bits(graph.n).astype(np.float64)
    W = graph.weight_matrix()
    n_a = bits @ W
    deg = W.sum(axis=1)
    nu_a = payoff.a * n_a + payoff.c * (deg - n_a)
    nu_b = payoff.d * n_a + payoff.b * (deg - n_a)
    return nu_a - nu_b, bits.astype(np.int8)


def _flip_stay(graph, payoff, beta, restricted=None):
    """Probabilities that vertex i flips / keeps its strategy when updated in x."""
    gap, bits = _payoff_gaps(graph, payoff)
    if math.isinf(beta):
        p_a = np.where(gap > POTENTIAL_TOL, 1.0, np.where(gap < -POTENTIAL_TOL, 0.0, bits.astype(float)))
        p_b = 1.0 - p_a
    else:
        p_a = expit(beta * gap)
        p_b = expit(-beta * gap)
    free = _free_mask(graph.n, restricted)
    p_a[:, ~free] = 0.0
    p_b[:, ~free] = 1.0
    is_a = bits == 1
    flip = np.where(is_a, p_b, p_a)
    stay = np.where(is_a, p_a, p_b)
    return flip, stay


def _exponents(graph, payoff, restricted=None):
    """Resistance of flipping / staying for every (configuration, vertex)."""
    gap, bits = _payoff_gaps(graph, payoff)
    gap = np.where(np.abs(gap) <= POTENTIAL_TOL, 0.0, gap)
    r_a = np.maximum(0.0, -gap)   # choosing A
    r_b = np.maximum(0.0, gap)    # choosing B
    free = _free_mask(graph.n, restricted)
    r_a[:, ~free] = np.inf
    r_b[:, ~free] = 0.0
    is_a = bits == 1
    return np.where(is_a, r_b, r_a), np.where(is_a, r_a, r_b)


# -- chains ------------------------------------------------------------------------

@dataclass
class ChainMatrix:
    """Row-stochastic transition matrix with structural flags."""

    P: sp.csr_matrix
    n: int
    aux: int = 1
    aux_kind: str = "none"
    irreducible: bool = False
    aperiodic: bool = False
    closed_classes: list = field(default_factory=list)

    @property
    def size(self):
        return self.P.shape[0]

    def state_index(self, config, aux=0):
        from .model import pack
        return pack(config) * self.aux + int(aux)

    def config_of(self, s):
        return unpack(int(s) // self.aux, self.n)

    def aux_of(self, s):
        return int(s) % self.aux

    def label(self, s):
        text = to_bitstring(self.config_of(s))
        return text if self.aux == 1 else f"{text}:{self.aux_of(s)}"

    def dense(self):
        return self.P.toarray()


def _finish(P, n, aux=1, aux_kind="none"):
    P = sp.csr_matrix(P)
    P.eliminate_zeros()
    sums = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(sums - 1.0)) > 1e-12:
        raise AssertionError(f"rows do not sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3g})")
    chain = ChainMatrix(P, n, aux, aux_kind)
    _classify(chain)
    return chain


def chain_from_matrix(P, n=None, aux=1, aux_kind="none"):
    """Wrap a row-stochastic matrix (dense or sparse) as a :class:`ChainMatrix`."""
    P = sp.csr_matrix(P, dtype=np.float64)
    if n is None:
        n = max(0, int(P.shape[0] // aux - 1).bit_length())
    return _finish(P, n, aux, aux_kind)


def _classify(chain):
    P = chain.P
    ncomp, labels = connected_components(P, directed=True, connection="strong")
    chain.irreducible = ncomp == 1
    coo = P.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_ = np.zeros(ncomp, dtype=bool)
    open_[labels[coo.row[leaving]]] = True
    chain.closed_classes = [np.flatnonzero(labels == c) for c in range(ncomp) if not open_[c]]
    if not chain.irreducible:
        chain.aperiodic = False
        return
    if np.any(P.diagonal() > 0):
        chain.aperiodic = True
        return
    order, _ = breadth_first_order(P, 0, directed=True, return_predecessors=True)
    level = np.full(chain.size, -1, dtype=np.int64)
    level[0] = 0
    for s in order:
        row = P.indices[P.indptr[s]:P.indptr[s + 1]]
        for t in row:
            if level[t] < 0:
                level[t] = level[s] + 1
    g = 0
    for s, t in zip(coo.row, coo.col):
        g = math.gcd(g, int(level[s] + 1 - level[t]))
    chain.aperiodic = g == 1


def vertex_chain(graph, payoff, params, i, restricted=None):
    """Kernel of a single update of vertex ``i``."""
    _check_states(1 << graph.n, MAX_PLAIN_STATES, "plain")
    flip, stay = _flip_stay(graph, payoff, params.beta, restricted)
    return _finish(_mix_matrix(graph.n, flip, stay, {int(i): 1.0}), graph.n)


def _mix_matrix(n, flip, stay, weights):
    """Sum over vertices of ``weights[i] * (single update of i)``."""
    S = 1 << n
    idx = np.arange(S)
    rows, cols, vals = [], [], []
    diag = np.zeros(S)
    for i, q in weights.items():
        if q <= 0:
            continue
        rows.append(idx)
        cols.append(idx ^ (1 << i))
        vals.append(q * flip[:, i])
        diag += q * stay[:, i]
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(S, S)).tocsr()


def build_chain(graph, payoff, params, scheduler=None, restricted=None, per_round=True):
    """Exact one-step kernel of the dynamics.

    ``scheduler`` is a :class:`RandomScheduler` (default), a
    :class:`PeriodicScheduler` (one full pass of its order when ``per_round``,
    otherwise a per-step chain on ``(config, phase)``) or a
    :class:`ContagionScheduler` (chain on ``(config, last scheduled vertex)``).
    ``restricted`` lists the vertices that update by the log-linear rule;
    the others always switch to B.
    """
    scheduler = scheduler or RandomScheduler()
    n = graph.n
    scheduler.validate_for(n)
    if isinstance(params, (int, float)):
        params = ModelParams(params)
    if isinstance(scheduler, AdversarialScheduler):
        raise ValueError("the adversary depends on its hammer pointer; it has no configuration chain")

    if isinstance(scheduler, ContagionScheduler):
        _check_states((1 << n) * n, MAX_CONTAGION_STATES, "contagion")
        return _contagion_chain(graph, payoff, params, scheduler, restricted)

    _check_states(1 << n, MAX_PLAIN_STATES, "plain")
    flip, stay = _flip_stay(graph, payoff, params.beta, restricted)
    if isinstance(scheduler, RandomScheduler):
        return _finish(_mix_matrix(n, flip, stay, {i: 1.0 / n for i in range(n)}), n)

    steps = [_mix_matrix(n, flip, stay, dict(enumerate(scheduler.distributions[k])))
             for k in scheduler.order]
    if per_round:
        _check_states(1 << n, MAX_ROUND_STATES, "per-round")
        P = steps[0]
        for D in steps[1:]:
            P = P @ D
        return _finish(P, n)
    m = len(steps)
    _check_states((1 << n) * m, MAX_PLAIN_STATES, "phase")
    blocks = []
    for phase, D in enumerate(steps):
        coo = D.tocoo()
        blocks.append((coo.row * m + phase, coo.col * m + (phase + 1) % m, coo.data))
    rows, cols, vals = (np.concatenate(x) for x in zip(*blocks))
    S = (1 << n) * m
    return _finish(sp.coo_matrix((vals, (rows, cols)), shape=(S, S)), n, m, "phase")


def _contagion_chain(graph, payoff, params, sched, restricted):
    n = graph.n
    flip, stay = _flip_stay(graph, payoff, params.beta, restricted)
    S = 1 << n
    x = np.arange(S)
    rows, cols, vals = [], [], []
    for w in range(n):
        for y in np.flatnonzero(sched.kernel[w] > 0):
            q = sched.kernel[w, y]
            rows += [x * n + w, x * n + w]
            cols += [(x ^ (1 << y)) * n + y, x * n + y]
            vals += [q * flip[:, y], q * stay[:, y]]
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(S * n, S * n))
    return _finish(P.tocsr(), n, n, "walker")


# -- distributions ---------------------------------------------------------------------

def stationary(chain, allow_transient=False):
    """Unique stationary distribution of an irreducible, aperiodic chain.

    With ``allow_transient`` a chain with a single closed class is accepted
    (the restricted dynamics has transient states); transient states get 0.
    """
    if not chain.irreducible:
        classes = [[chain.label(s) for s in c] for c in chain.closed_classes]
        if not (allow_transient and len(classes) == 1):
            raise ReducibleChainError(f"chain is reducible with {len(classes)} closed class(es)", classes)
        keep = chain.closed_classes[0]
        sub = ChainMatrix(chain.P[keep][:, keep].tocsr(), chain.n, chain.aux, chain.aux_kind)
        _classify(sub)
        mu = np.zeros(chain.size)
        mu[keep] = stationary(sub)
        return mu
    if not chain.aperiodic:
        raise ValueError("chain is periodic; its stationary distribution is not a limit")
    S = chain.size
    if S == 1:
        return np.ones(1)
    A = (chain.P.T - sp.identity(S, format="csr")).tolil()
    A[S - 1, :] = np.ones(S)
    b = np.zeros(S)
    b[-1] = 1.0
    if S <= DENSE_LIMIT:
        mu = np.linalg.solve(A.toarray(), b)
    else:
        mu = spsolve(A.tocsc(), b)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    resid = np.max(np.abs(chain.P.T @ mu - mu))
    if resid > STATIONARY_RESIDUAL:
        raise ArithmeticError(f"stationary residual {resid:.3g} exceeds {STATIONARY_RESIDUAL}")
    return mu


def gibbs(graph, payoff, beta, support=None):
    """``exp(beta * potential) / Z`` over configurations, by log-sum-exp.

    With ``support`` (a vertex set S) only configurations that play B outside
    S carry mass: the Gibbs measure of the restricted dynamics.
    """
    if not payoff.is_potential:
        raise ValueError("Gibbs measure needs a potential game (c == d)")
    beta = float(beta)
    if not 0 <= beta < math.inf:
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    logw = beta * all_potentials(graph, payoff)
    if support is not None:
        outside = ~_free_mask(graph.n, support)
        bits = _state_bits(graph.n)
        logw = np.where(bits[:, outside].any(axis=1), -np.inf, logw)
    return np.exp(logw - logsumexp(logw))


@dataclass
class DetailedBalanceReport:
    max_violation: float
    max_violation_as_printed: float
    pairs: int


def detailed_balance_check(graph, payoff, beta, chain=None):
    """Largest ``|ln(p_xy / p_yx) - beta (rho(y) - rho(x))|`` over single flips.

    Also reports the residual of the opposite orientation
    ``beta (rho(x) - rho(y))`` so the two can be compared side by side.
    """
    if chain is None:
        chain = build_chain(graph, payoff, ModelParams(beta))
    if chain.aux != 1:
        raise ValueError("detailed balance is checked on configuration chains")
    rho = all_potentials(graph, payoff)
    P = chain.P.tocsr()
    worst = worst_printed = 0.0
    pairs = 0
    for i in range(graph.n):
        x = np.arange(chain.size)
        y = x ^ (1 << i)
        sel = x < y
        x, y = x[sel], y[sel]
        pxy = np.asarray(P[x, y]).ravel()
        pyx = np.asarray(P[y, x]).ravel()
        ok = (pxy > 0) & (pyx > 0)
        if not ok.any():
            continue
        lr = np.log(pxy[ok]) - np.log(pyx[ok])
        d = beta * (rho[y[ok]] - rho[x[ok]])
        worst = max(worst, float(np.max(np.abs(lr - d))))
        worst_printed = max(worst_printed, float(np.max(np.abs(lr + d))))
        pairs += int(ok.sum())
    return DetailedBalanceReport(worst, worst_printed, pairs)


# -- resistances ---------------------------------------------------------------------

def move_resistance(a1, a2, j2, graph, payoff):
    """Resistance of updating vertex ``j2`` in ``a1`` with outcome ``a2``.

    Downhill moves cost the potential drop; keeping a strategy when the
    switch would raise the potential costs that rise; everything else is free.
    """
    a1 = np.asarray(a1, dtype=np.int8)
    a2 = np.asarray(a2, dtype=np.int8)
    diff = np.flatnonzero(a1 != a2)
    if diff.size > 1 or (diff.size == 1 and diff[0] != j2):
        raise ValueError(f"a2 must equal a1 or a1 with vertex {j2} flipped")
    r1 = potential(graph, a1, payoff)
    if diff.size == 1:
        r2 = potential(graph, a2, payoff)
        return r1 - r2 if r2 < r1 - POTENTIAL_TOL else 0.0
    a3 = a1.copy()
    a3[j2] = 1 - a3[j2]
    r3 = potential(graph, a3, payoff)
    return r3 - r1 if r3 > r1 + POTENTIAL_TOL else 0.0


DEFAULT_FIT_GRID = (math.exp(-8), math.exp(-12))


def resistance_by_fit(chain_family, x, y, grid=DEFAULT_FIT_GRID):
    """Slope of ``ln P_xy`` against ``ln eps`` between two noise levels.

    ``chain_family`` maps a :class:`ModelParams` to a :class:`ChainMatrix`.
    Returns ``None`` when the arc is absent at some grid point.
    """
    e1, e2 = grid
    p1 = chain_family(ModelParams.from_epsilon(e1)).P[x, y]
    p2 = chain_family(ModelParams.from_epsilon(e2)).P[x, y]
    if p1 <= 0 or p2 <= 0:
        return None
    return (math.log(p2) - math.log(p1)) / (math.log(e2) - math.log(e1))


def move_probability(graph, payoff, params, a1, a2, j2):
    """Probability that updating ``j2`` in ``a1`` yields ``a2``."""
    from .model import update_distribution
    a1 = np.asarray(a1, dtype=np.int8)
    p_a, p_b = update_distribution(graph, a1, j2, params, payoff)
    return p_a if a2[j2] == 1 else p_b


def fit_move_resistance(graph, payoff, a1, a2, j2, grid=DEFAULT_FIT_GRID):
    e1, e2 = grid
    p1 = move_probability(graph, payoff, ModelParams.from_epsilon(e1), a1, a2, j2)
    p2 = move_probability(graph, payoff, ModelParams.from_epsilon(e2), a1, a2, j2)
    if p1 <= 0 or p2 <= 0:
        return None
    return (math.log(p2) - math.log(p1)) / (math.log(e2) - math.log(e1))


@dataclass
class ResistanceDigraph:
    """Chain states with feasible non-loop moves weighted by their resistance."""

    size: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    self_loop: np.ndarray
    n: int
    aux: int = 1
    aux_kind: str = "none"

    def label(self, s):
        text = to_bitstring(unpack(int(s) // self.aux, self.n))
        return text if self.aux == 1 else f"{text}:{int(s) % self.aux}"

    def config_of(self, s):
        return unpack(int(s) // self.aux, self.n)

    def arc_weight(self, x, y):
        hit = np.flatnonzero((self.src == x) & (self.dst == y))
        return float(self.weight[hit].min()) if hit.size else None

    def zero_arcs(self, tol=POTENTIAL_TOL):
        keep = self.weight <= tol
        return self.src[keep], self.dst[keep]


def _digraph(size, src, dst, w, loops, n, aux=1, aux_kind="none"):
    src = np.concatenate(src) if isinstance(src, list) else src
    dst = np.concatenate(dst) if isinstance(dst, list) else dst
    w = np.concatenate(w) if isinstance(w, list) else w
    keep = np.isfinite(w) & (src != dst)
    return ResistanceDigraph(size, src[keep].astype(np.int64), dst[keep].astype(np.int64),
                             w[keep], loops, n, aux, aux_kind)


def resistance_digraph(graph, payoff, scheduler=None, restricted=None):
    """Resistances of every feasible move, from the local payoff gaps.

    Periodic schedulers get the per-pass chain: a pass's resistance is the
    min-plus product of the per-step resistances.
    """
    scheduler = scheduler or RandomScheduler()
    n = graph.n
    scheduler.validate_for(n)
    rf, rs = _exponents(graph, payoff, restricted)
    S = 1 << n
    x = np.arange(S)
    if isinstance(scheduler, RandomScheduler):
        _check_states(S, MAX_PLAIN_STATES, "plain")
        src = [x] * n
        dst = [x ^ (1 << i) for i in range(n)]
        w = [rf[:, i] for i in range(n)]
        return _digraph(S, src, dst, w, rs.min(axis=1), n)
    if isinstance(scheduler, ContagionScheduler):
        _check_states(S * n, MAX_CONTAGION_STATES, "contagion")
        src, dst, w = [], [], []
        loops = np.full(S * n, np.inf)
        for v in range(n):
            for y in np.flatnonzero(scheduler.kernel[v] > 0):
                src += [x * n + v, x * n + v]
                dst += [(x ^ (1 << y)) * n + y, x * n + y]
                w += [rf[:, y], rs[:, y]]
                if y == v:
                    loops[x * n + v] = rs[:, y]
        return _digraph(S * n, src, dst, w, loops, n, n, "walker")
    if isinstance(scheduler, PeriodicScheduler):
        _check_states(S, MAX_ROUND_STATES, "per-round")
        R = None
        for k in scheduler.order:
            supp = np.flatnonzero(scheduler.distributions[k] > 0)
            if R is None:
                R = np.full((S, S), np.inf)
                R[x, x] = rs[:, supp].min(axis=1)
                for i in supp:
                    R[x, x ^ (1 << i)] = np.minimum(R[x, x ^ (1 << i)], rf[:, i])
                continue
            new = R + rs[:, supp].min(axis=1)[None, :]
            for i in supp:
                y = x ^ (1 << i)
                # reach z from y = z ^ bit by flipping i
                new = np.minimum(new, R[:, y] + rf[y, i][None, :])
            R = new
        loops = np.diag(R).copy()
        src, dst = np.nonzero(np.isfinite(R))
        return _digraph(S, src, dst, R[src, dst], loops, n)
    raise ValueError(f"no resistance digraph for {type(scheduler).__name__}")


@dataclass
class StableSetReport:
    per_root: np.ndarray
    minimum: float
    stable: list
    predicted: list
    labels: list

    @property
    def matches_prediction(self):
        return sorted(self.stable) == sorted(self.predicted)

    def stable_labels(self):
        return [self.labels[s] for s in self.stable]


def all_a_states(digraph):
    full = (1 << digraph.n) - 1
    return [full * digraph.aux + a for a in range(digraph.aux)]


def zero_resistance_closed_classes(digraph, tol=POTENTIAL_TOL):
    src, dst = digraph.zero_arcs(tol)
    G = sp.coo_matrix((np.ones(src.size), (src, dst)), shape=(digraph.size, digraph.size)).tocsr()
    ncomp, labels = connected_components(G, directed=True, connection="strong")
    leaving = labels[src] != labels[dst]
    open_ = np.zeros(ncomp, dtype=bool)
    open_[labels[src[leaving]]] = True
    return [np.flatnonzero(labels == c) for c in range(ncomp) if not open_[c]]


def stable_states(digraph, roots="auto", tol=1e-7):
    """Roots of minimum-resistance in-trees, one Chu-Liu/Edmonds solve per root.

    ``roots="all"`` solves for every state; ``"recurrent"`` only for states in
    closed classes of the zero-resistance subgraph (the only states that can
    carry limit mass); ``"auto"`` picks "all" up to 1024 states. Unsolved roots
    hold NaN in ``per_root``; unreachable roots hold ``inf``.
    """
    if roots == "auto":
        roots = "all" if digraph.size <= 1024 else "recurrent"
    if roots == "all":
        cand = np.arange(digraph.size)
    elif roots == "recurrent":
        cand = np.concatenate(zero_resistance_closed_classes(digraph))
    else:
        cand = np.asarray(roots, dtype=np.int64)
    per_root = np.full(digraph.size, np.nan)
    for r in cand:
        per_root[r] = min_in_tree_weight(digraph.size, digraph.src, digraph.dst, digraph.weight, int(r))
    finite = per_root[np.isfinite(per_root)]
    if finite.size == 0:
        raise ValueError("no root is reachable from every state")
    best = float(finite.min())
    stable = [int(s) for s in np.flatnonzero(np.isfinite(per_root) & (per_root <= best + tol))]
    labels = [digraph.label(s) for s in range(digraph.size)]
    return StableSetReport(per_root, best, stable, all_a_states(digraph), labels)


def restricted_potential_argmax(graph, S, payoff):
    """Highest-potential configuration among those playing B outside ``S``.

    Returns ``(config, ties)`` where ``ties`` lists every maximiser.
    """
    S = sorted({int(v) for v in S})
    if len(S) > 20:
        raise CapacityError(f"|S| = {len(S)} exceeds 20 for restricted enumeration")
    best, ties = -np.inf, []
    for mask in range(1 << len(S)):
        cfg = np.zeros(graph.n, dtype=np.int8)
        for j, v in enumerate(S):
            if (mask >> j) & 1:
                cfg[v] = 1
        val = potential(graph, cfg, payoff)
        if val > best + POTENTIAL_TOL:
            best, ties = val, [cfg]
        elif abs(val - best) <= POTENTIAL_TOL:
            ties.append(cfg)
    return ties[0], ties


# -- hitting times ---------------------------------------------------------------------

def target_mask(chain, threshold):
    """States whose configuration has at least ``threshold`` A-players."""
    counts = _state_bits(chain.n).sum(axis=1)
    return np.repeat(counts >= threshold, chain.aux)


def expected_hitting_times(chain, target):
    """Expected steps to enter ``target`` (boolean mask) from every state.

    States that cannot reach the target get ``inf``.
    """
    target = np.asarray(target, dtype=bool)
    S = chain.size
    if not target.any():
        raise ValueError("target set is empty")
    # states that can reach the target: reverse reachability
    R = chain.P.T.tocsr()
    reach = target.copy()
    frontier = np.flatnonzero(target)
    while frontier.size:
        nxt = np.unique(R[frontier].indices)
        nxt = nxt[~reach[nxt]]
        reach[nxt] = True
        frontier = nxt
    h = np.full(S, np.inf)
    h[target] = 0.0
    live = np.flatnonzero(reach & ~target)
    if live.size:
        Q = chain.P[live][:, live]
        A = sp.identity(live.size, format="csc") - Q.tocsc()
        if live.size <= DENSE_LIMIT:
            h[live] = np.linalg.solve(A.toarray(), np.ones(live.size))
        else:
            h[live] = spsolve(A, np.ones(live.size))
    return h


def exact_inertia(chain, p, start=None):
    """Expected steps until at least ``(1 - p) n`` agents play A.

    From ``start`` (a state index) or, by default, the maximum over all states
    as in the p-inertia definition.
    """
    threshold = math.ceil((1.0 - p) * chain.n - 1e-9)
    h = expected_hitting_times(chain, target_mask(chain, threshold))
    return float(h.max() if start is None else h[start])
