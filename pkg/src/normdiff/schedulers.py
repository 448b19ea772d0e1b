"""Scheduler families, per-run scheduler state, round segmentation and fairness."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K

log = logging.getLogger(__name__)

HAMMER_CAP = 10**4
_PROB_TOL = 1e-9


def _row_cdf(dist):
    dist = np.asarray(dist, dtype=np.float64)
    cdf = np.cumsum(dist, axis=1)
    for row in range(dist.shape[0]):
        last = np.flatnonzero(dist[row] > 0)[-1]
        cdf[row, last:] = 1.0
    return cdf


def _check_stochastic(dist, what):
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2:
        raise ValueError(f"{what} must be a 2-d array of probabilities")
    if np.any(dist < 0) or not np.all(np.isfinite(dist)):
        raise ValueError(f"{what} has negative or non-finite entries")
    sums = dist.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _PROB_TOL):
        raise ValueError(f"{what} rows must sum to 1 (got {sums})")
    return dist


def _check_permutation(order, size, what):
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(size)):
        raise ValueError(f"{what} must be a permutation of 0..{size - 1}, got {order}")
    return order


class Scheduler:
    """Common interface: ``kind`` plus the arrays handed to the kernels."""

    kind = -1
    adaptive = False

    def validate_for(self, n):
        pass

    def kernel_args(self, n):
        raise NotImplementedError

    def initial_state(self, n):
        self.validate_for(n)
        return SchedulerState.fresh(self, n)


@dataclass(frozen=True)
class RandomScheduler(Scheduler):
    """Uniform choice of the next vertex at every step."""

    kind = K.RANDOM

    def kernel_args(self, n):
        return np.zeros((1, 1)), np.zeros(1, dtype=np.int64), 0, 0

    def block_length(self):
        return 1


@dataclass(frozen=True, eq=False)
class PeriodicScheduler(Scheduler):
    """Non-adaptive scheduler: step t samples from ``distributions[order[t mod m]]``."""

    distributions: np.ndarray
    order: tuple = None

    kind = K.PERIODIC

    def __post_init__(self):
        dist = _check_stochastic(self.distributions, "periodic distributions")
        dist.setflags(write=False)
        object.__setattr__(self, "distributions", dist)
        m, n = dist.shape
        order = tuple(range(m)) if self.order is None else self.order
        object.__setattr__(self, "order", _check_permutation(order, m, "distribution order"))
        covered = np.any(dist > 0, axis=0)
        if not covered.all():
            missing = np.flatnonzero(~covered).tolist()
            raise ValueError(f"vertices {missing} lie in the support of no distribution")

    @classmethod
    def round_robin(cls, n, order=None):
        """Point masses on each vertex in turn: a deterministic sweep."""
        return cls(np.eye(n), order)

    @classmethod
    def uniform_sets(cls, n, sets, order=None):
        dist = np.zeros((len(sets), n))
        for i, s in enumerate(sets):
            s = sorted({int(v) for v in s})
            if not s:
                raise ValueError("empty vertex set in periodic schedule")
            dist[i, s] = 1.0 / len(s)
        return cls(dist, order)

    @property
    def m(self):
        return self.distributions.shape[0]

    @property
    def n(self):
        return self.distributions.shape[1]

    def validate_for(self, n):
        if self.n != n:
            raise ValueError(f"scheduler is over {self.n} vertices, graph has {n}")

    def kernel_args(self, n):
        return _row_cdf(self.distributions), np.asarray(self.order, dtype=np.int64), 0, 0

    def block_length(self):
        return self.m

    def round_probabilities(self):
        """P(vertex x is scheduled at least once during one pass of the order)."""
        return 1.0 - np.prod(1.0 - self.distributions, axis=0)

    def individual_fairness(self):
        """Largest C with P(x scheduled per pass) >= C / n for every x."""
        return self.n * float(self.round_probabilities().min())


@dataclass(frozen=True)
class AdversarialScheduler(Scheduler):
    """State-aware adversary working in passes over a fixed permutation.

    In every pass the first ``hammer_count = ceil(r n) + 1`` vertices of
    ``order`` are rescheduled until they play B (at most ``cap`` extra times),
    then each remaining vertex is scheduled exactly once.
    """

    r: float
    order: tuple
    cap: int = HAMMER_CAP

    kind = K.ADVERSARY
    adaptive = True

    def __post_init__(self):
        if not 0 < self.r <= 1:
            raise ValueError(f"adversary fraction r must lie in (0, 1], got {self.r}")
        object.__setattr__(self, "order", _check_permutation(self.order, len(self.order), "adversary order"))
        if self.cap < 0:
            raise ValueError("cap must be nonnegative")

    @classmethod
    def identity(cls, n, r, cap=HAMMER_CAP):
        return cls(r, tuple(range(n)), cap)

    @classmethod
    def containing(cls, n, r, order=None, cap=HAMMER_CAP):
        """Adversary that keeps the fraction of A-players at or below ``r``.

        Hammering ``ceil((1 - r) n) + 1`` vertices leaves at most
        ``floor(r n) - 1`` vertices free to hold A between their turns, plus
        the one vertex currently being hammered.
        """
        if not 0 < r < 1:
            raise ValueError(f"containment level r must lie in (0, 1), got {r}")
        order = tuple(range(n)) if order is None else order
        return cls(1.0 - r, order, cap)

    @property
    def n(self):
        return len(self.order)

    @property
    def hammer_count(self):
        return min(self.n, math.ceil(self.r * self.n - 1e-9) + 1)

    def validate_for(self, n):
        if self.n != n:
            raise ValueError(f"adversary permutation covers {self.n} vertices, graph has {n}")

    def kernel_args(self, n):
        return np.zeros((1, 1)), np.asarray(self.order, dtype=np.int64), self.hammer_count, int(self.cap)

    def block_length(self):
        return 1


@dataclass(frozen=True, eq=False)
class ContagionScheduler(Scheduler):
    """Next vertex drawn from ``kernel[previous vertex]``: a random walk of activity.

    Requires ``v in supp(D_v)``, a symmetric support and a strongly connected
    support digraph. The walk starts at ``start``; the first scheduled vertex
    is drawn from ``D_start``.
    """

    kernel: np.ndarray
    start: int = 0

    kind = K.CONTAGION
    adaptive = True

    def __post_init__(self):
        D = _check_stochastic(self.kernel, "contagion kernel")
        n = D.shape[0]
        if D.shape != (n, n):
            raise ValueError("contagion kernel must be square")
        D.setflags(write=False)
        object.__setattr__(self, "kernel", D)
        support = D > 0
        if not np.all(np.diag(support)):
            bad = np.flatnonzero(~np.diag(support)).tolist()
            raise ValueError(f"v must lie in supp(D_v); fails for {bad}")
        if not np.array_equal(support, support.T):
            raise ValueError("contagion support is not weakly reversible (x in supp D_y iff y in supp D_x)")
        ncomp, _ = connected_components(csr_matrix(support), directed=True, connection="strong")
        if ncomp != 1:
            raise ValueError("contagion support digraph is not strongly connected")
        start = int(self.start)
        if not 0 <= start < n:
            raise ValueError(f"start vertex {start} outside 0..{n - 1}")
        object.__setattr__(self, "start", start)

    @classmethod
    def neighbor_walk(cls, graph, start=None):
        """Uniform over the closed neighbourhood ``N(v) + {v}`` of each vertex."""
        n = graph.n
        D = np.zeros((n, n))
        for v in range(n):
            nb = [v] + [int(u) for u in graph.neighbors(v)]
            D[v, nb] = 1.0 / len(nb)
        if start is None:
            start = (n - 1) // 2
        return cls(D, start)

    @property
    def n(self):
        return self.kernel.shape[0]

    def validate_for(self, n):
        if self.n != n:
            raise ValueError(f"contagion kernel is over {self.n} vertices, graph has {n}")

    def kernel_args(self, n):
        return _row_cdf(self.kernel), np.zeros(1, dtype=np.int64), 0, 0

    def block_length(self):
        return 1


class SchedulerState:
    """Mutable per-run state of one scheduler, confined to a single run."""

    def __init__(self, kind, array):
        self.kind = kind
        self.array = array

    @classmethod
    def fresh(cls, spec, n):
        arr = np.zeros(K.S_SIZE, dtype=np.int64)
        if spec.kind == K.CONTAGION:
            arr[K.S_WALKER] = spec.start
        return cls(spec.kind, arr)

    def copy(self):
        return SchedulerState(self.kind, self.array.copy())

    @property
    def steps(self):
        return int(self.array[K.S_STEP])

    @property
    def position(self):
        return int(self.array[K.S_POS])

    @property
    def walker(self):
        return int(self.array[K.S_WALKER])

    @property
    def passes(self):
        return int(self.array[K.S_ROUND])

    @property
    def capped(self):
        return int(self.array[K.S_CAPPED])

    def __repr__(self):
        return f"SchedulerState(kind={self.kind}, {self.array.tolist()})"


def next_vertex(spec, state, config, rng):
    """Draw the next vertex to update and advance the scheduler.

    For the adversary the pointer only moves in :func:`observe`, once the
    scheduled vertex has updated; ``config`` is what the adversary inspects.
    """
    cdf, order, _, _ = spec.kernel_args(len(config))
    return int(K.next_vertex(spec.kind, state.array, cdf, order, len(config), rng))


def observe(spec, state, config, v):
    """Let an adaptive scheduler see the configuration after ``v`` updated."""
    _, _, hammer, cap = spec.kernel_args(len(config))
    K.after_update(spec.kind, state.array, np.asarray(config, dtype=np.int8), int(v), len(config), hammer, cap)


def adversary_step(spec, state, config):
    """Vertex the adversary schedules next in ``config`` (see :func:`observe`)."""
    if spec.kind != K.ADVERSARY:
        raise TypeError("adversary_step needs an AdversarialScheduler")
    return int(spec.order[state.position])


# -- rounds and fairness ----------------------------------------------------------

@dataclass
class Rounds:
    lengths: np.ndarray
    tail: int

    @property
    def boundaries(self):
        return np.cumsum(self.lengths)


def segment_rounds(trace, n):
    """Split a schedule into minimal segments that each schedule every vertex."""
    trace = np.asarray(trace, dtype=np.int64)
    if trace.size == 0:
        raise ValueError("trace must be nonempty")
    if trace.min() < 0 or trace.max() >= n:
        raise ValueError(f"trace entries must lie in 0..{n - 1}")
    out = np.zeros(trace.size // n + 1, dtype=np.int64)
    k, start = K.segment_kernel(trace, n, out)
    return Rounds(out[:k].copy(), int(trace.size - start))


def b_fair_check(trace, n, b):
    """Every window of ``b (n - 1) + 1`` consecutive steps schedules every vertex."""
    trace = np.asarray(trace, dtype=np.int64)
    window = b * (n - 1) + 1
    if trace.size < window:
        raise ValueError(f"trace of length {trace.size} is shorter than one window ({window})")
    return bool(K.window_cover_kernel(trace, n, window))


F_SHAPES = {
    "n": lambda n: float(n),
    "nlogn": lambda n: n * math.log(n),
    "n2": lambda n: float(n * n),
}


@dataclass
class FairnessReport:
    round_lengths: np.ndarray
    f_value: float
    tail: dict = field(default_factory=dict)
    c_estimate: float = float("nan")
    block_length: int = 1
    steps: int = 0

    def g_hat(self, eps):
        return float(np.mean(self.round_lengths > eps * self.f_value))


def empirical_individual_fairness(trace, n, block):
    """``n`` times the smallest per-block scheduling frequency over vertices."""
    trace = np.asarray(trace, dtype=np.int64)
    nblocks = trace.size // block
    if nblocks == 0:
        return float("nan")
    trace = trace[: nblocks * block]
    if block == 1:
        freq = np.bincount(trace, minlength=n) / nblocks
    else:
        keys = np.unique(np.arange(trace.size) // block * n + trace)
        freq = np.bincount(keys % n, minlength=n) / nblocks
    return n * float(freq.min())


def fairness_whp_estimate(spec, f, n, rounds, graph=None, payoff=None, beta=0.0,
                          seed=0, epsilons=(1, 2, 4, 8), max_steps=None, config=None):
    """Empirical round-length profile of a scheduler over ``rounds`` rounds.

    Non-adaptive and contagion schedulers ignore the configuration, so by
    default they run on an edgeless graph. The adversary needs the actual
    dynamics: pass ``graph``, ``payoff`` and ``beta`` (start defaults to all-B).
    """
    from .dynamics import ArraySink, Rounds as StopRounds, run
    from .graphs import WeightedGraph
    from .model import ModelParams, PayoffMatrix, all_b

    if rounds < 100:
        raise ValueError(f"need at least 100 rounds, got {rounds}")
    if isinstance(f, str):
        f = F_SHAPES[f]
    if graph is None:
        if spec.adaptive and spec.kind == K.ADVERSARY:
            raise ValueError("the adversary's rounds depend on the dynamics; pass graph and payoff")
        graph = WeightedGraph(n)
    if payoff is None:
        payoff = PayoffMatrix(3, 2, 0, 0)
    if max_steps is None:
        max_steps = int(rounds * max(50 * n * math.log(n + 1), 10 * n) + 10**6)
    start = all_b(n) if config is None else config
    sink = ArraySink(fields=("vertex",))
    res = run(graph, payoff, start, spec, ModelParams(beta), StopRounds(rounds),
              np.random.default_rng(seed), sink=sink, budget=max_steps)
    if res.rounds < rounds:
        from .errors import CapacityError
        raise CapacityError(f"only {res.rounds} of {rounds} rounds completed within {max_steps} steps")
    trace = sink.array("vertex")
    lengths = segment_rounds(trace, n).lengths[:rounds]
    fv = float(f(n))
    block = spec.block_length()
    report = FairnessReport(lengths, fv, block_length=block, steps=int(trace.size))
    report.tail = {float(e): report.g_hat(e) for e in epsilons}
    report.c_estimate = empirical_individual_fairness(trace, n, block)
    return report
