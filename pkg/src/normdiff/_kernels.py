"""Hot loops: the log-linear update, scheduler stepping, the trajectory loop,
online round segmentation and the close-knit subset scan.

Every function here is compiled by numba when available (see ``_accel``) and
otherwise runs as plain Python. Arrays only; no Python objects cross the
boundary except the ``numpy.random.Generator``.
"""
import math

import numpy as np

from ._accel import jit

TIE_TOL = 1e-9

RANDOM = 0
PERIODIC = 1
ADVERSARY = 2
CONTAGION = 3

# scheduler state slots
S_STEP = 0       # vertices handed out so far
S_POS = 1        # periodic: index into the order; adversary: pointer into pi
S_REPS = 2       # adversary: reschedules of the current hammered vertex
S_WALKER = 3     # contagion: last scheduled vertex
S_ROUND = 4      # adversary: completed passes over pi
S_CAPPED = 5     # adversary: hammer loops cut off by the cap
S_SIZE = 6

# run statistics slots
R_STEPS = 0
R_COUNT_A = 1
R_MAX_COUNT = 2
R_EXCEED = 3
R_FIRST_EXCEED = 4
R_ROUND_ID = 5
R_SEEN = 6
R_ROUND_START = 7
R_ROUNDS_STORED = 8
R_SIZE = 9

# run status
RUNNING = 0
STOPPED = 1


@jit
def local_payoffs(indptr, indices, weights, mat, config, i):
    nu_a = 0.0
    nu_b = 0.0
    for e in range(indptr[i], indptr[i + 1]):
        xj = config[indices[e]]
        nu_a += weights[e] * mat[1, xj]
        nu_b += weights[e] * mat[0, xj]
    return nu_a, nu_b


@jit
def prob_a(nu_a, nu_b, beta, current):
    if beta == math.inf:
        diff = nu_a - nu_b
        if diff > TIE_TOL:
            return 1.0
        if diff < -TIE_TOL:
            return 0.0
        return 1.0 if current == 1 else 0.0
    x = beta * (nu_a - nu_b)
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@jit
def potential_delta(indptr, indices, weights, mat, config, i, new):
    """Change of the edge-sum potential (canonical h < k order) if ``x_i := new``."""
    old = config[i]
    if old == new:
        return 0.0
    d = 0.0
    for e in range(indptr[i], indptr[i + 1]):
        j = indices[e]
        xj = config[j]
        if i < j:
            d += weights[e] * (mat[new, xj] - mat[old, xj])
        else:
            d += weights[e] * (mat[xj, new] - mat[xj, old])
    return d


@jit
def sample_row(cdf, row, u):
    # first column with cdf > u
    lo = 0
    hi = cdf.shape[1] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[row, mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@jit
def next_vertex(kind, sstate, cdf, order, n, rng):
    if kind == RANDOM:
        v = int(rng.random() * n)
        if v >= n:
            v = n - 1
    elif kind == PERIODIC:
        row = order[sstate[S_POS]]
        v = sample_row(cdf, row, rng.random())
        sstate[S_POS] = (sstate[S_POS] + 1) % order.shape[0]
    elif kind == CONTAGION:
        v = sample_row(cdf, sstate[S_WALKER], rng.random())
        sstate[S_WALKER] = v
    else:
        v = order[sstate[S_POS]]
    sstate[S_STEP] += 1
    return v


@jit
def after_update(kind, sstate, config, v, n, hammer, cap):
    """Adversary bookkeeping once the scheduled vertex has updated."""
    if kind != ADVERSARY:
        return
    pos = sstate[S_POS]
    if pos < hammer and config[v] == 1:
        if sstate[S_REPS] < cap:
            sstate[S_REPS] += 1
            return
        sstate[S_CAPPED] += 1
    sstate[S_REPS] = 0
    pos += 1
    if pos >= n:
        pos = 0
        sstate[S_ROUND] += 1
    sstate[S_POS] = pos


@jit
def run_kernel(indptr, indices, weights, mat, beta, config, free,
               kind, cdf, order, hammer, cap, sstate,
               seen, round_buf, stats, pot,
               stop_steps, stop_count, stop_absorb, stop_rounds, exceed_above,
               max_steps, rng,
               record, tr_vertex, tr_pre, tr_post, tr_count, tr_pot):
    """Advance the chain by at most ``max_steps`` updates.

    ``stats`` (int64) and ``pot`` (float64, length 1) carry totals across
    calls. Returns ``(steps_done, status)``; status is ``STOPPED`` once the
    stopping rule holds, checked before every step.
    """
    n = config.shape[0]
    done = 0
    while True:
        ca = stats[R_COUNT_A]
        if stop_count >= 0 and ca >= stop_count:
            return done, STOPPED
        if stop_absorb and (ca == 0 or ca == n):
            return done, STOPPED
        if stop_steps >= 0 and stats[R_STEPS] >= stop_steps:
            return done, STOPPED
        if stop_rounds >= 0 and stats[R_ROUNDS_STORED] >= stop_rounds:
            return done, STOPPED
        if done >= max_steps:
            return done, RUNNING

        v = next_vertex(kind, sstate, cdf, order, n, rng)
        pre = config[v]
        u = rng.random()
        if free[v]:
            nu_a, nu_b = local_payoffs(indptr, indices, weights, mat, config, v)
            post = 1 if u < prob_a(nu_a, nu_b, beta, pre) else 0
        else:
            post = 0
        if post != pre:
            pot[0] += potential_delta(indptr, indices, weights, mat, config, v, post)
            config[v] = post
            ca += 1 if post == 1 else -1
            stats[R_COUNT_A] = ca
        after_update(kind, sstate, config, v, n, hammer, cap)

        step = stats[R_STEPS] + 1
        stats[R_STEPS] = step
        if ca > stats[R_MAX_COUNT]:
            stats[R_MAX_COUNT] = ca
        if ca > exceed_above:
            stats[R_EXCEED] += 1
            if stats[R_FIRST_EXCEED] < 0:
                stats[R_FIRST_EXCEED] = step

        # greedy round segmentation: a round closes once every vertex was seen
        if seen[v] != stats[R_ROUND_ID]:
            seen[v] = stats[R_ROUND_ID]
            stats[R_SEEN] += 1
            if stats[R_SEEN] == n:
                k = stats[R_ROUNDS_STORED]
                if k < round_buf.shape[0]:
                    round_buf[k] = step - stats[R_ROUND_START]
                stats[R_ROUNDS_STORED] = k + 1
                stats[R_ROUND_START] = step
                stats[R_ROUND_ID] += 1
                stats[R_SEEN] = 0

        if record:
            tr_vertex[done] = v
            tr_pre[done] = pre
            tr_post[done] = post
            tr_count[done] = ca
            tr_pot[done] = pot[0]
        done += 1


@jit
def segment_kernel(trace, n, out):
    """Greedy minimal covering segments; returns (rounds found, start of the tail)."""
    stamp = np.full(n, -1, dtype=np.int64)
    rid = 0
    seen = 0
    start = 0
    k = 0
    for t in range(trace.shape[0]):
        v = trace[t]
        if stamp[v] != rid:
            stamp[v] = rid
            seen += 1
            if seen == n:
                out[k] = t + 1 - start
                k += 1
                start = t + 1
                rid += 1
                seen = 0
    return k, start


@jit
def window_cover_kernel(trace, n, window):
    """True iff every length-``window`` slice of ``trace`` contains all n values."""
    counts = np.zeros(n, dtype=np.int64)
    distinct = 0
    for t in range(trace.shape[0]):
        v = trace[t]
        if counts[v] == 0:
            distinct += 1
        counts[v] += 1
        if t >= window:
            w = trace[t - window]
            counts[w] -= 1
            if counts[w] == 0:
                distinct -= 1
        if t >= window - 1 and distinct < n:
            return False
    return True


@jit
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@jit
def subset_scan_kernel(adj_mask, inner_deg, deg):
    """Minimise e(S', S) / deg(S') over nonempty S' of a set with local adjacency masks.

    ``adj_mask[i]`` has bit j set when local vertices i and j are adjacent,
    ``inner_deg[i] = |N(i) & S|`` and ``deg[i]`` is the full degree. Walks a
    Gray code; ties keep the numerically smallest mask. Returns
    ``(best_e, best_deg, best_mask)``; ``best_deg == 0`` flags a zero-degree
    subset, for which the ratio is undefined.
    """
    s = adj_mask.shape[0]
    total = 1 << s
    cur = 0
    e = 0
    dsum = 0
    best_e = -1
    best_d = 1
    best_mask = 0
    for g in range(1, total):
        # bit flipped between gray(g-1) and gray(g)
        v = 0
        t = g
        while (t & 1) == 0:
            t >>= 1
            v += 1
        bit = 1 << v
        if cur & bit:
            cur ^= bit
            e -= inner_deg[v] - _popcount(adj_mask[v] & cur)
            dsum -= deg[v]
        else:
            e += inner_deg[v] - _popcount(adj_mask[v] & cur)
            dsum += deg[v]
            cur |= bit
        if dsum == 0:
            return 0, 0, cur
        if best_e < 0:
            best_e, best_d, best_mask = e, dsum, cur
        else:
            lhs = e * best_d
            rhs = best_e * dsum
            if lhs < rhs or (lhs == rhs and cur < best_mask):
                best_e, best_d, best_mask = e, dsum, cur
    return best_e, best_d, best_mask
