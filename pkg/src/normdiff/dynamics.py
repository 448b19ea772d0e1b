"""Trajectories of the log-linear dynamics under a scheduler."""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .model import as_config, count_a, potential

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**7
CHUNK = 1 << 16
_MASK64 = (1 << 64) - 1


# -- stopping rules ---------------------------------------------------------------

@dataclass(frozen=True)
class Steps:
    count: int


@dataclass(frozen=True)
class FractionA:
    """Fire once at least ``(1 - p) n`` agents play A."""

    p: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    def threshold(self, n):
        return math.ceil((1.0 - self.p) * n - 1e-9)


@dataclass(frozen=True)
class Absorption:
    """Fire at all-A or all-B (the fixed points of best-response dynamics)."""


@dataclass(frozen=True)
class Rounds:
    count: int


def parse_stop(text):
    """``steps:T``, ``fractionA:p``, ``absorption`` or ``rounds:R``; ``|`` combines."""
    rules = []
    for part in text.split("|"):
        part = part.strip()
        key, _, arg = part.partition(":")
        key = key.strip().lower()
        try:
            if key == "steps":
                rules.append(Steps(int(arg)))
            elif key in ("fractiona", "fraction_a"):
                rules.append(FractionA(float(arg)))
            elif key == "absorption" and not arg:
                rules.append(Absorption())
            elif key == "rounds":
                rules.append(Rounds(int(arg)))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"bad stopping rule {part!r}; use steps:T | fractionA:p | absorption | rounds:R") from None
    return tuple(rules)


# -- traces -----------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    step: int
    vertex: int
    pre: int
    post: int
    count_a: int
    potential: float


@dataclass
class TraceChunk:
    step: np.ndarray
    vertex: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    count_a: np.ndarray
    potential: np.ndarray

    def records(self):
        for i in range(len(self.step)):
            yield TraceRecord(int(self.step[i]), int(self.vertex[i]), int(self.pre[i]),
                              int(self.post[i]), int(self.count_a[i]), float(self.potential[i]))


class DiscardSink:
    records_trace = False

    def write(self, chunk):
        pass


class RingBufferSink:
    """Keeps the last ``capacity`` trace records."""

    records_trace = True

    def __init__(self, capacity=10_000):
        self._buf = deque(maxlen=capacity)

    def write(self, chunk):
        start = max(0, len(chunk.step) - (self._buf.maxlen or 0))
        sub = TraceChunk(*(getattr(chunk, f)[start:] for f in TraceChunk.__dataclass_fields__))
        self._buf.extend(sub.records())

    @property
    def records(self):
        return list(self._buf)

    def __len__(self):
        return len(self._buf)


class ArraySink:
    """Accumulates selected trace columns as arrays."""

    records_trace = True

    def __init__(self, fields=tuple(TraceChunk.__dataclass_fields__)):
        self.fields = tuple(fields)
        self._parts = {f: [] for f in self.fields}

    def write(self, chunk):
        for f in self.fields:
            self._parts[f].append(np.array(getattr(chunk, f)))

    def array(self, name):
        parts = self._parts[name]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


TRACE_HEADER = ("step", "vertex", "pre", "post", "countA", "potential")


class CsvTraceSink:
    """Streams ``step,vertex,pre,post,countA,potential`` rows to a text file."""

    records_trace = True

    def __init__(self, fh, header=True):
        self._fh = fh
        self._writer = csv.writer(fh, lineterminator="\n")
        if header:
            self._writer.writerow(TRACE_HEADER)

    def write(self, chunk):
        ab = "BA"
        rows = (
            (int(s), int(v), ab[int(p)], ab[int(q)], int(c), f"{x:.12g}")
            for s, v, p, q, c, x in zip(chunk.step, chunk.vertex, chunk.pre, chunk.post,
                                       chunk.count_a, chunk.potential)
        )
        self._writer.writerows(rows)


def trace_to_csv(records):
    buf = io.StringIO()
    sink = CsvTraceSink(buf)
    for r in records:
        sink.write(TraceChunk(*(np.array([getattr(r, f)]) for f in
                                ("step", "vertex", "pre", "post", "count_a", "potential"))))
    return buf.getvalue()


# -- seeding ------------------------------------------------------------------------

def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def replica_seed(seed, index):
    """Per-replica seed: ``splitmix64(seed XOR index)`` on 64 bits."""
    return splitmix64((int(seed) ^ int(index)) & _MASK64)


def derive_seed(seed, *keys):
    """Fold extra integer keys (size, start policy, ...) into a master seed."""
    out = int(seed) & _MASK64
    for k in keys:
        out = splitmix64(out ^ (int(k) & _MASK64))
    return out


def make_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.PCG64(seed_or_rng))


# -- running --------------------------------------------------------------------------

@dataclass
class RunResult:
    config: np.ndarray
    steps: int
    stopped: bool
    truncated: bool
    count_a: int
    potential: float
    state: object
    max_count_a: int
    exceedances: int
    first_exceedance: int
    rounds: int
    round_lengths: np.ndarray

    @property
    def fraction_a(self):
        return self.count_a / len(self.config)


def _stop_params(stop, n):
    rules = stop if isinstance(stop, (tuple, list)) else (stop,)
    if not rules:
        raise ValueError("at least one stopping rule is required")
    steps, count, absorb, rounds = -1, -1, False, -1
    for rule in rules:
        if isinstance(rule, Steps):
            if rule.count < 0:
                raise ValueError("steps must be >= 0")
            steps = rule.count if steps < 0 else min(steps, rule.count)
        elif isinstance(rule, FractionA):
            t = rule.threshold(n)
            count = t if count < 0 else min(count, t)
        elif isinstance(rule, Absorption):
            absorb = True
        elif isinstance(rule, Rounds):
            if rule.count < 0:
                raise ValueError("rounds must be >= 0")
            rounds = rule.count if rounds < 0 else min(rounds, rule.count)
        else:
            raise TypeError(f"unknown stopping rule {rule!r}")
    return steps, count, absorb, rounds


def _free_mask(n, restricted):
    if restricted is None:
        return np.ones(n, dtype=np.bool_)
    free = np.zeros(n, dtype=np.bool_)
    idx = sorted({int(v) for v in restricted})
    if not idx:
        raise ValueError("restricted vertex set must be nonempty")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"restricted set has vertices outside 0..{n - 1}")
    free[idx] = True
    return free


def run(graph, payoff, config, scheduler, params, stop, rng, sink=None, budget=None,
        state=None, restricted=None, exceed_above=None, round_capacity=0):
    """Iterate the dynamics from ``config`` until ``stop`` fires or ``budget`` steps.

    ``stop`` is a rule or a tuple of rules (any firing stops the run). When the
    budget is spent first the result is marked ``truncated``; that is not an
    error. ``restricted`` lists the vertices that follow the log-linear rule;
    every other vertex switches to B whenever it is scheduled.
    """
    n = graph.n
    config = as_config(config, n)
    scheduler.validate_for(n)
    if state is None:
        state = scheduler.initial_state(n)
    rng = make_rng(rng)
    stop_steps, stop_count, absorb, stop_rounds = _stop_params(stop, n)
    if budget is None:
        budget = stop_steps if stop_steps >= 0 else DEFAULT_BUDGET
    budget = int(budget)
    sink = DiscardSink() if sink is None else sink
    record = bool(sink.records_trace)
    free = _free_mask(n, restricted)
    cdf, order, hammer, cap = scheduler.kernel_args(n)
    mat = payoff.matrix
    beta = float(params.beta)

    ca = count_a(config)
    stats = np.zeros(K.R_SIZE, dtype=np.int64)
    stats[K.R_COUNT_A] = ca
    stats[K.R_MAX_COUNT] = ca
    stats[K.R_FIRST_EXCEED] = -1
    seen = np.full(n, -1, dtype=np.int64)
    round_buf = np.zeros(int(round_capacity), dtype=np.int64)
    pot = np.array([potential(graph, config, payoff)])
    exceed_above = n if exceed_above is None else int(exceed_above)

    size = CHUNK if record else 0
    tr_vertex = np.zeros(size, dtype=np.int64)
    tr_pre = np.zeros(size, dtype=np.int8)
    tr_post = np.zeros(size, dtype=np.int8)
    tr_count = np.zeros(size, dtype=np.int64)
    tr_pot = np.zeros(size, dtype=np.float64)

    done = 0
    stopped = False
    while True:
        limit = budget - done
        if record:
            limit = min(limit, CHUNK)
        start_step = int(stats[K.R_STEPS])
        steps, status = K.run_kernel(
            graph.indptr, graph.indices, graph.weights, mat, beta, config, free,
            scheduler.kind, cdf, order, hammer, cap, state.array,
            seen, round_buf, stats, pot,
            stop_steps, stop_count, absorb, stop_rounds, exceed_above,
            limit, rng,
            record, tr_vertex, tr_pre, tr_post, tr_count, tr_pot)
        steps = int(steps)
        done += steps
        if record and steps:
            sink.write(TraceChunk(np.arange(start_step + 1, start_step + steps + 1),
                                  tr_vertex[:steps].copy(), tr_pre[:steps].copy(),
                                  tr_post[:steps].copy(), tr_count[:steps].copy(),
                                  tr_pot[:steps].copy()))
        if status == K.STOPPED:
            stopped = True
            break
        if done >= budget:
            break
    if state.capped:
        log.warning("adversary hammer loop hit the cap of %d reschedules %d time(s)", cap, state.capped)
    nrounds = int(stats[K.R_ROUNDS_STORED])
    return RunResult(
        config=config, steps=done, stopped=stopped, truncated=not stopped,
        count_a=int(stats[K.R_COUNT_A]), potential=float(pot[0]), state=state,
        max_count_a=int(stats[K.R_MAX_COUNT]), exceedances=int(stats[K.R_EXCEED]),
        first_exceedance=int(stats[K.R_FIRST_EXCEED]), rounds=nrounds,
        round_lengths=round_buf[:min(nrounds, round_buf.size)].copy(),
    )


def run_restricted(graph, S, payoff, config, scheduler, params, stop, rng, **kwargs):
    """:func:`run` where vertices outside ``S`` always switch to B when scheduled."""
    return run(graph, payoff, config, scheduler, params, stop, rng, restricted=S, **kwargs)


def step(graph, payoff, config, scheduler, state, params, rng, restricted=None):
    """One scheduled update. Returns ``(new_config, TraceRecord)``; ``state`` advances."""
    sink = ArraySink()
    res = run(graph, payoff, config, scheduler, params, Steps(1), rng, sink=sink,
              state=state, restricted=restricted)
    rec = TraceRecord(state.steps, int(sink.array("vertex")[0]), int(sink.array("pre")[0]),
                      int(sink.array("post")[0]), res.count_a, res.potential)
    return res.config, rec
