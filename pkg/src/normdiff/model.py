"""Coordination game, configurations, potential and the log-linear update."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# Potentials closer than this are treated as equal.
POTENTIAL_TOL = 1e-9


class Strategy(IntEnum):
    """Agent strategy; the integer value is the bit used in packed configurations."""

    B = 0
    A = 1

    @property
    def label(self):
        return self.name


@dataclass(frozen=True)
class PayoffMatrix:
    """Symmetric 2x2 coordination game.

    ``m[A][A] = a``, ``m[A][B] = c``, ``m[B][A] = d``, ``m[B][B] = b``.
    Construction enforces strict risk dominance of (A, A), ``a - d > b - c > 0``.
    Payoffs with ``c != d`` do not admit the edge-sum potential and are only
    accepted with ``non_potential=True``.
    """

    a: float
    b: float
    c: float
    d: float
    non_potential: bool = False

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"payoff {name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if not (self.a - self.d > self.b - self.c > 0):
            raise ValueError(
                "payoff violates strict risk dominance a - d > b - c > 0 "
                f"(a - d = {self.a - self.d:g}, b - c = {self.b - self.c:g})"
            )
        if self.c != self.d and not self.non_potential:
            raise ValueError(
                f"c = {self.c:g} != d = {self.d:g}: the edge-sum potential is not exact; "
                "pass non_potential=True to accept this payoff without Gibbs oracles"
            )

    @property
    def is_potential(self):
        return self.c == self.d

    @property
    def matrix(self):
        """Payoffs indexed ``[own strategy code, partner strategy code]``."""
        m = np.empty((2, 2), dtype=np.float64)
        m[Strategy.A, Strategy.A] = self.a
        m[Strategy.A, Strategy.B] = self.c
        m[Strategy.B, Strategy.A] = self.d
        m[Strategy.B, Strategy.B] = self.b
        return m

    def payoff(self, own, partner):
        return float(self.matrix[int(own), int(partner)])

    @property
    def r_star(self):
        return r_star(self)


def r_star(payoff: PayoffMatrix) -> float:
    """Risk-dominance threshold ``(b - c) / ((a - d) + (b - c))``, in (0, 1/2)."""
    gap_b = payoff.b - payoff.c
    return gap_b / ((payoff.a - payoff.d) + gap_b)


def epsilon_from_beta(beta: float) -> float:
    if not beta >= 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return math.exp(-beta)


def beta_from_epsilon(epsilon: float) -> float:
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    return -math.log(epsilon)


@dataclass(frozen=True)
class ModelParams:
    """Inverse noise ``beta``; ``math.inf`` gives best-response dynamics."""

    beta: float

    def __post_init__(self):
        beta = float(self.beta)
        if math.isnan(beta) or beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_epsilon(cls, epsilon):
        return cls(beta_from_epsilon(epsilon))

    @property
    def epsilon(self):
        return 0.0 if math.isinf(self.beta) else epsilon_from_beta(self.beta)

    @property
    def is_best_response(self):
        return math.isinf(self.beta)


# -- configurations ---------------------------------------------------------
# A configuration is an int8 array with 1 = A, 0 = B. The packed form is an
# integer with vertex 0 as the least significant bit; the text form is a
# bitstring with vertex 0 leftmost.

def all_a(n):
    return np.ones(n, dtype=np.int8)


def all_b(n):
    return np.zeros(n, dtype=np.int8)


def as_config(states, n=None):
    config = np.asarray(states, dtype=np.int8).copy()
    if config.ndim != 1 or np.any((config != 0) & (config != 1)):
        raise ValueError("configuration must be a 1-d sequence of 0/1 strategy codes")
    if n is not None and config.size != n:
        raise ValueError(f"configuration has {config.size} entries, graph has {n} vertices")
    return config


def pack(config) -> int:
    out = 0
    for i, bit in enumerate(np.asarray(config)):
        if bit:
            out |= 1 << i
    return out


def unpack(index: int, n: int):
    return ((int(index) >> np.arange(n)) & 1).astype(np.int8)


def to_bitstring(config) -> str:
    return "".join("1" if s else "0" for s in np.asarray(config))


def from_bitstring(text: str):
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a configuration bitstring: {text!r}")
    return np.array([1 if ch == "1" else 0 for ch in text], dtype=np.int8)


def count_a(config) -> int:
    return int(np.count_nonzero(config))


# -- payoffs and the update rule -------------------------------------------

def node_payoff(graph, config, i, z, payoff) -> float:
    """Payoff of vertex ``i`` if it played ``z`` against its current neighbours."""
    m = payoff.matrix
    lo, hi = graph.indptr[i], graph.indptr[i + 1]
    nbrs = graph.indices[lo:hi]
    return float(np.sum(graph.weights[lo:hi] * m[int(z), np.asarray(config)[nbrs]]))


def potential(graph, config, payoff) -> float:
    """Edge sum of ``w_hk * m[x_h][x_k]`` with ``h < k``."""
    config = np.asarray(config)
    if config.size != graph.n:
        raise ValueError(f"configuration has {config.size} entries, graph has {graph.n} vertices")
    if graph.m == 0:
        return 0.0
    m = payoff.matrix
    h, k = graph.edges[:, 0], graph.edges[:, 1]
    return float(np.sum(graph.edge_weights * m[config[h], config[k]]))


def logistic_pair(x):
    """``(1/(1+e^-x), 1/(1+e^x))`` computed without overflow or cancellation."""
    if x >= 0:
        e = math.exp(-x)
        return 1.0 / (1.0 + e), e / (1.0 + e)
    e = math.exp(x)
    return e / (1.0 + e), 1.0 / (1.0 + e)


def update_distribution(graph, config, i, params: ModelParams, payoff: PayoffMatrix):
    """Return ``(pA, pB)`` for vertex ``i`` resampling its strategy.

    At ``beta = inf`` the strict best response is chosen; a tie (within
    ``POTENTIAL_TOL``) keeps the current strategy.
    """
    nu_a = node_payoff(graph, config, i, Strategy.A, payoff)
    nu_b = node_payoff(graph, config, i, Strategy.B, payoff)
    if params.is_best_response:
        diff = nu_a - nu_b
        if diff > POTENTIAL_TOL:
            return 1.0, 0.0
        if diff < -POTENTIAL_TOL:
            return 0.0, 1.0
        return (1.0, 0.0) if config[i] == Strategy.A else (0.0, 1.0)
    return logistic_pair(params.beta * (nu_a - nu_b))
