"""Minimum-weight rooted in-trees (Chu-Liu/Edmonds, value only)."""
import numpy as np


def min_in_tree_weight(n, src, dst, weight, root):
    """Least total weight of a set of arcs giving every vertex a unique path to ``root``.

    Arcs are ``src[i] -> dst[i]`` with nonnegative finite ``weight[i]``;
    self-loops are ignored. Returns ``inf`` when some vertex cannot reach
    the root.
    """
    # An in-tree towards root is an out-arborescence from root on reversed arcs.
    u = np.asarray(dst, dtype=np.int64).copy()
    v = np.asarray(src, dtype=np.int64).copy()
    w = np.asarray(weight, dtype=np.float64).copy()
    root = int(root)
    total = 0.0
    while True:
        keep = u != v
        u, v, w = u[keep], v[keep], w[keep]
        best = np.full(n, np.inf)
        np.minimum.at(best, v, w)
        best[root] = 0.0
        if np.isinf(best).any():
            return np.inf
        if u.size == 0:
            return total
        order = np.lexsort((w, v))
        vs = v[order]
        first = order[np.r_[True, vs[1:] != vs[:-1]]]
        pre = np.full(n, -1, dtype=np.int64)
        pre[v[first]] = u[first]
        pre[root] = -1
        total += float(best.sum())

        comp = np.full(n, -1, dtype=np.int64)
        mark = np.full(n, -1, dtype=np.int64)
        ncomp = 0
        for start in range(n):
            x = start
            while x != root and comp[x] < 0 and mark[x] != start:
                mark[x] = start
                x = pre[x]
            if x != root and comp[x] < 0:
                # x lies on a cycle discovered in this walk
                y = pre[x]
                while y != x:
                    comp[y] = ncomp
                    y = pre[y]
                comp[x] = ncomp
                ncomp += 1
        if ncomp == 0:
            return total
        rest = comp < 0
        comp[rest] = np.arange(ncomp, ncomp + int(rest.sum()))
        w = w - best[v]
        u, v = comp[u], comp[v]
        n = ncomp + int(rest.sum())
        root = int(comp[root])
