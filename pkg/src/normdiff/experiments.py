"""Monte-Carlo p-inertia, scaling fits and adversary containment."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .dynamics import ArraySink, FractionA, Steps, derive_seed, make_rng, replica_seed, run
from .model import ModelParams, PayoffMatrix, all_b, as_config
from .schedulers import F_SHAPES, AdversarialScheduler

log = logging.getLogger(__name__)

MIN_REPLICAS = 30
PILOT_BETAS = (2.0, 3.0, 4.0, 5.0, 6.0)
PILOT_CENSOR_RATE = 0.05
Z95 = 1.96


def default_budget(graph, scheduler):
    """Censoring budget: ``200 n^2`` for contagion walks, ``200 n ln n`` otherwise."""
    n = graph.n
    if scheduler.kind == K.CONTAGION:
        return 200 * n * n
    return int(math.ceil(200 * n * math.log(max(n, 2))))


def _map(fn, items, threads):
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- p-inertia ------------------------------------------------------------------------

@dataclass
class PolicyEstimate:
    """Hitting-time sample from one start configuration."""

    policy: str
    start: np.ndarray
    steps: np.ndarray
    censored: np.ndarray

    @property
    def n_censored(self):
        return int(self.censored.sum())

    @property
    def usable(self):
        return self.n_censored < len(self.steps)

    @property
    def mean(self):
        ok = self.steps[~self.censored]
        return float(ok.mean()) if ok.size else math.nan

    @property
    def half_width(self):
        ok = self.steps[~self.censored]
        if ok.size < 2:
            return math.nan
        return Z95 * float(ok.std(ddof=1)) / math.sqrt(ok.size)


@dataclass
class InertiaEstimate:
    """Worst-start Monte-Carlo estimate of the expected time to reach ``(1 - p) n`` A-players.

    ``mean`` and ``half_width`` belong to the start policy with the largest
    mean; all policies are kept in ``policies``. Means use uncensored runs.
    """

    p: float
    beta: float
    graph: str
    n: int
    replicas: int
    budget: int
    policies: list = field(default_factory=list)

    @property
    def worst(self):
        usable = [e for e in self.policies if e.usable]
        if not usable:
            return self.policies[0]
        return max(usable, key=lambda e: e.mean)

    @property
    def policy(self):
        return self.worst.policy

    @property
    def mean(self):
        return self.worst.mean

    @property
    def half_width(self):
        return self.worst.half_width

    @property
    def censored(self):
        return self.worst.n_censored

    @property
    def usable(self):
        return any(e.usable for e in self.policies)

    @property
    def all_b(self):
        return self.policies[0]

    def rows(self, family=None):
        """Rows for ``inertia.csv``."""
        fam = family or self.graph
        out = []
        for e in self.policies:
            for i, (s, c) in enumerate(zip(e.steps, e.censored)):
                out.append((fam, self.n, self.beta, self.p, e.policy, i, int(s), int(bool(c))))
        return out


INERTIA_HEADER = ("family", "n", "beta", "p", "start", "replica", "steps", "censored")


def _hit_once(graph, payoff, scheduler, params, start, p, budget, seed):
    res = run(graph, payoff, start.copy(), scheduler, params, FractionA(p), make_rng(seed), budget=budget)
    return res.steps, res.truncated


def p_inertia_mc(graph, payoff, scheduler, beta, p, replicas=50, budget=None, seed=0,
                 random_starts=0, start=None, threads=None):
    """Estimate p-inertia by independent replicas from all-B (or ``start``).

    With ``random_starts = k`` also runs ``replicas`` from each of ``k``
    uniformly drawn configurations and keeps the worst mean. Runs reaching
    ``budget`` steps are censored and excluded from the mean.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if replicas < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas for a normal-approximation CI, got {replicas}")
    n = graph.n
    params = beta if isinstance(beta, ModelParams) else ModelParams(float(beta))
    budget = default_budget(graph, scheduler) if budget is None else int(budget)
    scheduler.validate_for(n)

    starts = [("all-B" if start is None else "given", all_b(n) if start is None else as_config(start, n))]
    if random_starts:
        draw = make_rng(derive_seed(seed, n, 0xA11))
        for j in range(random_starts):
            starts.append((f"random-{j}", draw.integers(0, 2, size=n).astype(np.int8)))

    est = InertiaEstimate(p, params.beta, graph.name or f"graph-{n}", n, replicas, budget)
    for k, (name, cfg) in enumerate(starts):
        base = derive_seed(seed, n, k)
        jobs = [replica_seed(base, i) for i in range(replicas)]
        out = _map(lambda s: _hit_once(graph, payoff, scheduler, params, cfg, p, budget, s), jobs, threads)
        steps = np.array([o[0] for o in out], dtype=np.int64)
        cens = np.array([o[1] for o in out], dtype=bool)
        est.policies.append(PolicyEstimate(name, cfg, steps, cens))
    if not est.usable:
        log.warning("every run on %s was censored at %d steps; estimate unusable", est.graph, budget)
    return est


def pilot_beta(graph, payoff, scheduler, p, betas=PILOT_BETAS, replicas=MIN_REPLICAS,
               budget=None, seed=0, threads=None, max_rate=PILOT_CENSOR_RATE):
    """Smallest ``beta`` in ``betas`` whose pilot censoring rate is below ``max_rate``.

    Returns ``(beta, rates)``; ``beta`` is None when no candidate qualifies.
    """
    rates = {}
    for b in betas:
        est = p_inertia_mc(graph, payoff, scheduler, b, p, replicas, budget,
                           derive_seed(seed, 0xB1107, int(b * 1000)), threads=threads)
        rates[b] = est.all_b.n_censored / replicas
        if rates[b] < max_rate:
            return b, rates
    return None, rates


# -- scaling ------------------------------------------------------------------------------

@dataclass
class ScalingReport:
    family: str
    sizes: list
    estimates: list
    slope: float
    intercept: float
    stderr: float
    beta: float

    @property
    def usable(self):
        return all(e.usable for e in self.estimates)

    def row(self):
        return (self.family, self.slope, self.stderr, self.intercept)


SCALING_HEADER = ("family", "slope", "stderr", "intercept")


def loglog_fit(ns, means):
    fit = stats.linregress(np.log(ns), np.log(means))
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def scaling_experiment(family, sizes, graph_builder, scheduler_builder, payoff, beta, p,
                       replicas=50, seed=0, budget=None, threads=None):
    """Per-size p-inertia followed by a least-squares fit of log mean on log n.

    ``graph_builder(size)`` returns the graph and ``scheduler_builder(graph)``
    the scheduler; ``budget`` may be a callable of the graph.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 4:
        raise ValueError(f"need at least 4 sizes, got {len(sizes)}")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be strictly increasing, got {sizes}")
    ests = []
    for s in sizes:
        g = graph_builder(s)
        sched = scheduler_builder(g)
        bud = budget(g) if callable(budget) else budget
        ests.append(p_inertia_mc(g, payoff, sched, beta, p, replicas, bud, derive_seed(seed, s),
                                 threads=threads))
    ns = np.array([e.n for e in ests], dtype=float)
    means = np.array([e.mean for e in ests])
    ok = np.isfinite(means)
    if ok.sum() < 2:
        slope = intercept = stderr = math.nan
    else:
        slope, intercept, stderr = loglog_fit(ns[ok], means[ok])
    return ScalingReport(family, sizes, ests, slope, intercept, stderr, float(beta))


# -- adversary ------------------------------------------------------------------------------

@dataclass
class ContainmentReport:
    n: int
    r: float
    beta: float
    horizon: int
    replicas: int
    max_fraction: float
    exceedances: int
    per_replica_max: np.ndarray
    round_lengths: np.ndarray
    f_value: float
    capped: int = 0
    offending: list = field(default_factory=list)

    def g_hat(self, eps):
        if self.round_lengths.size == 0:
            return math.nan
        return float(np.mean(self.round_lengths > eps * self.f_value))


def _offending_prefix(graph, payoff, sched, params, seed, first, keep=200):
    sink = ArraySink(fields=("step", "vertex", "pre", "post", "count_a"))
    run(graph, payoff, all_b(graph.n), sched, params, Steps(first), make_rng(seed), sink=sink)
    cols = [sink.array(f)[-keep:] for f in sink.fields]
    return [tuple(int(c[i]) for c in cols) for i in range(len(cols[0]))]


def adversary_containment(graph, r, beta, horizon, replicas=50, seed=0, payoff=None,
                          construction="containing", f="nlogn", threads=None):
    """Run the adaptive adversary from all-B and record how far A spreads.

    ``construction="containing"`` hammers the first ``n - floor(r n)``
    vertices of the order until they play B; ``"literal"`` hammers
    ``ceil(r n) + 1`` of them. An exceedance is a step whose A-fraction is
    above ``r``; the first offending replica's trace tail is kept.
    """
    n = graph.n
    payoff = payoff or PayoffMatrix(3, 2, 0, 0)
    params = ModelParams(float(beta))
    if construction == "containing":
        sched = AdversarialScheduler.containing(n, r)
    elif construction == "literal":
        sched = AdversarialScheduler.identity(n, r)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    limit = math.floor(r * n + 1e-9)
    cap = horizon // n + 1

    def one(s):
        res = run(graph, payoff, all_b(n), sched, params, Steps(horizon), make_rng(s),
                  exceed_above=limit, round_capacity=cap)
        return res

    seeds = [replica_seed(derive_seed(seed, n, int(round(r * 1000))), i) for i in range(replicas)]
    results = _map(one, seeds, threads)
    maxima = np.array([res.max_count_a / n for res in results])
    exceed = int(sum(res.exceedances for res in results))
    lengths = np.concatenate([res.round_lengths for res in results]) if results else np.zeros(0, np.int64)
    fv = F_SHAPES[f](n) if isinstance(f, str) else float(f(n))
    rep = ContainmentReport(n, r, float(beta), horizon, replicas, float(maxima.max(initial=0.0)),
                            exceed, maxima, lengths, fv,
                            capped=int(sum(res.state.capped for res in results)))
    for s, res in zip(seeds, results):
        if res.exceedances:
            rep.offending = _offending_prefix(graph, payoff, sched, params, s, res.first_exceedance)
            log.warning("A-fraction exceeded %.3f at step %d", r, res.first_exceedance)
            break
    return rep


# -- csv ------------------------------------------------------------------------------------

def write_rows(fh, header, rows, footer=None):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if footer:
        fh.write(footer.rstrip("\n") + "\n")
