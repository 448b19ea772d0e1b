"""Weighted graphs, family generators, the graph file format and close-knittedness."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from ._accel import NUMBA_ENABLED
from .errors import CapacityError

MAX_CLOSE_KNIT_SET = 24
DEFAULT_SEARCH_BUDGET = 10**6


class WeightedGraph:
    """Undirected graph on vertices ``0..n-1`` with positive edge weights.

    Edges are stored once, as ``(h, k)`` with ``h < k``, sorted. Adjacency is
    also kept in CSR form (``indptr``, ``indices``, ``weights``) for the
    kernels. Instances are immutable.
    """

    def __init__(self, n, edges=(), weights=None, name=None, labels=None):
        n = int(n)
        if n <= 0:
            raise ValueError(f"graph needs at least one vertex, got n={n}")
        edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        edges = edges.reshape(-1, 2)
        if weights is None:
            weights = np.ones(len(edges))
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise ValueError("one weight per edge required")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError(f"edge endpoint outside 0..{n - 1}")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        if np.any(~(weights > 0)) or not np.all(np.isfinite(weights)):
            raise ValueError("edge weights must be positive and finite")
        canon = np.sort(edges, axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon, weights = canon[order], weights[order]
        if len(canon) > 1 and np.any(np.all(canon[1:] == canon[:-1], axis=1)):
            raise ValueError("duplicate edge")

        self.n = n
        self.edges = canon
        self.edge_weights = weights
        self.name = name or f"graph{n}"
        self.labels = list(labels) if labels is not None else list(range(n))
        if len(self.labels) != n:
            raise ValueError("one label per vertex required")

        src = np.concatenate([canon[:, 0], canon[:, 1]])
        dst = np.concatenate([canon[:, 1], canon[:, 0]])
        w = np.concatenate([weights, weights])
        perm = np.lexsort((dst, src))
        self.indices = dst[perm]
        self.weights = w[perm]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.indptr[1:])
        self.degree = np.diff(self.indptr)
        for arr in (self.edges, self.edge_weights, self.indices, self.weights, self.indptr, self.degree):
            arr.setflags(write=False)

    @property
    def m(self):
        return int(self.edges.shape[0])

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def weight_matrix(self):
        W = np.zeros((self.n, self.n))
        W[self.edges[:, 0], self.edges[:, 1]] = self.edge_weights
        W[self.edges[:, 1], self.edges[:, 0]] = self.edge_weights
        return W

    def is_connected(self):
        return len(_component(self, 0)) == self.n

    def __repr__(self):
        return f"WeightedGraph(name={self.name!r}, n={self.n}, m={self.m})"

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.edge_weights, other.edge_weights))

    __hash__ = None


def _component(graph, start):
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in graph.neighbors(v):
            u = int(u)
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


# -- families ---------------------------------------------------------------

def cycle(n):
    if n < 3:
        raise ValueError(f"cycle needs n >= 3, got {n}")
    return WeightedGraph(n, [(i, (i + 1) % n) for i in range(n)], name=f"cycle-{n}")


def line(n):
    """Path on n vertices; for odd n the labels run ``-(n-1)/2 .. (n-1)/2``."""
    if n < 1:
        raise ValueError(f"line needs n >= 1, got {n}")
    half = (n - 1) // 2
    labels = list(range(-half, n - half))
    return WeightedGraph(n, [(i, i + 1) for i in range(n - 1)], name=f"line-{n}", labels=labels)


def complete(n):
    if n < 1:
        raise ValueError(f"complete graph needs n >= 1, got {n}")
    return WeightedGraph(n, list(itertools.combinations(range(n), 2)), name=f"complete-{n}")


def grid(rows, cols):
    if rows < 1 or cols < 1:
        raise ValueError(f"grid needs positive dimensions, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return WeightedGraph(rows * cols, edges, name=f"grid-{rows}x{cols}")


FAMILIES = {"cycle": cycle, "line": line, "complete": complete, "grid": grid}


def make_family(kind, *sizes):
    """Unit-weight graph of a named topology: ``make_family("cycle", 8)``."""
    try:
        builder = FAMILIES[kind]
    except KeyError:
        raise ValueError(f"unknown graph family {kind!r}; choose from {sorted(FAMILIES)}") from None
    if not sizes or any(int(s) <= 0 for s in sizes):
        raise ValueError(f"{kind} needs positive size parameters, got {sizes}")
    return builder(*(int(s) for s in sizes))


# -- file format --------------------------------------------------------------
# "n m" header, then m lines "h k w". An optional section introduced by a line
# "contagion:" carries n rows of n probabilities (row v is D_v).

def read_graph_file(path):
    """Return ``(graph, contagion_matrix_or_None)``."""
    path = Path(path)
    rows = []
    for raw in path.read_text().splitlines():
        line_ = raw.split("#", 1)[0].strip()
        if line_:
            rows.append(line_)
    if not rows:
        raise ValueError(f"{path}: empty graph file")
    try:
        n, m = (int(t) for t in rows[0].split())
    except ValueError:
        raise ValueError(f"{path}: header must be 'n m', got {rows[0]!r}") from None
    if len(rows) < 1 + m:
        raise ValueError(f"{path}: expected {m} edge lines")
    edges, weights = [], []
    for row in rows[1:1 + m]:
        parts = row.split()
        if len(parts) != 3:
            raise ValueError(f"{path}: edge line must be 'h k w', got {row!r}")
        edges.append((int(parts[0]), int(parts[1])))
        weights.append(float(parts[2]))
    graph = WeightedGraph(n, edges, weights, name=path.stem)
    rest = rows[1 + m:]
    if not rest:
        return graph, None
    if rest[0].rstrip(":").strip().lower() != "contagion":
        raise ValueError(f"{path}: unexpected content after edges: {rest[0]!r}")
    matrix = np.array([[float(t) for t in row.split()] for row in rest[1:]])
    if matrix.shape != (n, n):
        raise ValueError(f"{path}: contagion section must be {n} rows of {n} probabilities")
    return graph, matrix


def write_graph_file(path, graph, contagion=None):
    lines = [f"{graph.n} {graph.m}"]
    for (h, k), w in zip(graph.edges, graph.edge_weights):
        lines.append(f"{h} {k} {w:.17g}")
    if contagion is not None:
        lines.append("contagion:")
        for row in np.asarray(contagion):
            lines.append(" ".join(f"{p:.17g}" for p in row))
    Path(path).write_text("\n".join(lines) + "\n")


# -- close-knittedness ------------------------------------------------------------

def _as_vertex_set(graph, vertices, what):
    out = sorted({int(v) for v in vertices})
    if out and (out[0] < 0 or out[-1] >= graph.n):
        raise ValueError(f"{what} contains a vertex outside 0..{graph.n - 1}")
    return out


def boundary_count(graph, sub, S):
    """Number of edges with one endpoint in ``sub`` and the other in ``S``.

    An edge with both endpoints in ``sub`` is counted once.
    """
    sub = set(_as_vertex_set(graph, sub, "S'"))
    S = set(_as_vertex_set(graph, S, "S"))
    if not sub:
        raise ValueError("S' must be nonempty")
    if not sub <= S:
        raise ValueError("S' must be a subset of S")
    count = 0
    for h, k in graph.edges:
        h, k = int(h), int(k)
        if (h in sub and k in S) or (k in sub and h in S):
            count += 1
    return count


@dataclass(frozen=True)
class CloseKnitReport:
    S: tuple
    min_ratio: float
    witness: tuple
    edges_inside: int = 0
    degree_sum: int = 0

    def is_close_knit(self, r):
        return self.edges_inside >= r * self.degree_sum - 1e-12


def _local_structure(graph, S):
    pos = {v: i for i, v in enumerate(S)}
    adj = np.zeros(len(S), dtype=np.int64)
    inner = np.zeros(len(S), dtype=np.int64)
    for i, v in enumerate(S):
        for u in graph.neighbors(v):
            j = pos.get(int(u))
            if j is not None:
                adj[i] |= 1 << j
                inner[i] += 1
    return adj, inner, graph.degree[S].astype(np.int64)


def _scan_numpy(adj, inner, deg, chunk=1 << 16):
    # vectorised over blocks of masks; same tie rule as the kernel
    s = len(adj)
    A = ((adj[:, None] >> np.arange(s)) & 1).astype(np.int64)
    best = None
    for lo in range(1, 1 << s, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << s), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(s)) & 1).astype(np.int64)
        internal = np.einsum("bi,ij,bj->b", bits, A, bits) // 2
        e = bits @ inner - internal
        d = bits @ deg
        if np.any(d == 0):
            return 0, 0, int(masks[np.argmax(d == 0)])
        ratio = e / d
        i = int(np.argmin(ratio))
        cand = (int(e[i]), int(d[i]), int(masks[i]))
        if best is None or cand[0] * best[1] < best[0] * cand[1]:
            best = cand
    return best


def close_knit_ratio(graph, S):
    """Exhaustive minimum of ``e(S', S) / sum(deg S')`` over nonempty ``S' <= S``."""
    S = _as_vertex_set(graph, S, "S")
    if not S:
        raise ValueError("S must be nonempty")
    if len(S) > MAX_CLOSE_KNIT_SET:
        raise CapacityError(f"|S| = {len(S)} exceeds the exhaustive scan limit {MAX_CLOSE_KNIT_SET}")
    adj, inner, deg = _local_structure(graph, S)
    if NUMBA_ENABLED:
        e, d, mask = _kernels.subset_scan_kernel(adj, inner, deg)
    else:
        e, d, mask = _scan_numpy(adj, inner, deg)
    witness = tuple(S[i] for i in range(len(S)) if (int(mask) >> i) & 1)
    if d == 0:
        raise ValueError(f"ratio undefined: subset {witness} has total degree 0")
    return CloseKnitReport(tuple(S), e / d, witness, int(e), int(d))


@dataclass
class CloseKnitSearch:
    """Outcome of an (r, k) search. ``holds`` is None when the budget ran out."""

    r: float
    k: int
    holds: bool | None
    witnesses: dict = field(default_factory=dict)
    failing: list = field(default_factory=list)
    exhausted: list = field(default_factory=list)

    def __bool__(self):
        if self.holds is None:
            raise ValueError("indeterminate close-knit search (budget exhausted)")
        return self.holds


def _connected_sets(graph, v, k, budget):
    """Connected k-subsets containing v, grown breadth-first, sorted; None if over budget."""
    level = {(v,)}
    produced = 1
    for _ in range(k - 1):
        nxt = set()
        for s in sorted(level):
            members = set(s)
            frontier = sorted({int(u) for x in s for u in graph.neighbors(x)} - members)
            for u in frontier:
                cand = tuple(sorted(members | {u}))
                if cand not in nxt:
                    nxt.add(cand)
                    produced += 1
                    if produced > budget:
                        return None
        level = nxt
    return sorted(level)


def _all_sets(graph, v, k, budget):
    others = [u for u in range(graph.n) if u != v]
    out = []
    for rest in itertools.combinations(others, k - 1):
        out.append(tuple(sorted((v,) + rest)))
        if len(out) > budget:
            return None
    return sorted(out)


def is_rk_close_knit(graph, r, k, budget=DEFAULT_SEARCH_BUDGET, connected_only=True):
    """Decide whether every vertex lies in an r-close-knit set of size k.

    Candidates per vertex are connected k-subsets containing it (or every
    k-subset with ``connected_only=False``), tried in lexicographic order.
    Returns a ``CloseKnitSearch``; ``holds`` is None when some vertex ran out of
    budget before a witness was found and no vertex was refuted.
    """
    if not 1 <= k <= graph.n:
        raise ValueError(f"k must lie in 1..{graph.n}, got {k}")
    gen = _connected_sets if connected_only else _all_sets
    cache = {}
    result = CloseKnitSearch(r=r, k=k, holds=True)
    for v in range(graph.n):
        cands = gen(graph, v, k, budget)
        if cands is None:
            result.exhausted.append(v)
            continue
        for S in cands:
            if S not in cache:
                try:
                    cache[S] = close_knit_ratio(graph, S)
                except ValueError:
                    cache[S] = None
            rep = cache[S]
            if rep is not None and rep.is_close_knit(r):
                result.witnesses[v] = S
                break
        else:
            result.failing.append(v)
    if result.failing:
        result.holds = False
    elif result.exhausted:
        result.holds = None
    return result
