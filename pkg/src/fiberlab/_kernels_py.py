"""Pure-Python/numpy versions of the hot kernels.

These mirror ``_kernels.pyx`` operation by operation so that both backends
produce identical pivots and identical floating point results.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _northwest_corner(a, b):
    n, m = a.shape[0], b.shape[0]
    ra = a.copy()
    rb = b.copy()
    rows = np.empty(n + m - 1, dtype=np.int64)
    cols = np.empty(n + m - 1, dtype=np.int64)
    flow = np.empty(n + m - 1, dtype=np.float64)
    i = j = 0
    for k in range(n + m - 1):
        x = ra[i] if ra[i] < rb[j] else rb[j]
        rows[k], cols[k], flow[k] = i, j, x
        move_row = ra[i] <= rb[j]
        ra[i] -= x
        rb[j] -= x
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif move_row:
            i += 1
        else:
            j += 1
    return rows, cols, flow


def _tree_bfs(n, m, rows, cols, C):
    """Root the basis tree at row 0; return duals, parent node/slot, depth."""
    nn = n + m
    nslots = rows.shape[0]
    # adjacency in slot order (CSR)
    deg = np.zeros(nn + 1, dtype=np.int64)
    for s in range(nslots):
        deg[rows[s] + 1] += 1
        deg[n + cols[s] + 1] += 1
    start = np.cumsum(deg)
    fill = start[:-1].copy()
    adj = np.empty(2 * nslots, dtype=np.int64)
    for s in range(nslots):
        r = rows[s]
        c = n + cols[s]
        adj[fill[r]] = s
        fill[r] += 1
        adj[fill[c]] = s
        fill[c] += 1
    u = np.zeros(n)
    v = np.zeros(m)
    parent = np.full(nn, -1, dtype=np.int64)
    pslot = np.full(nn, -1, dtype=np.int64)
    depth = np.full(nn, -1, dtype=np.int64)
    queue = np.empty(nn, dtype=np.int64)
    queue[0] = 0
    depth[0] = 0
    head, tail = 0, 1
    while head < tail:
        node = queue[head]
        head += 1
        for p in range(start[node], start[node + 1]):
            s = adj[p]
            other = n + cols[s] if node < n else rows[s]
            if depth[other] >= 0:
                continue
            depth[other] = depth[node] + 1
            parent[other] = node
            pslot[other] = s
            if other >= n:
                v[other - n] = C[rows[s], cols[s]] - u[rows[s]]
            else:
                u[other] = C[rows[s], cols[s]] - v[cols[s]]
            queue[tail] = other
            tail += 1
    return u, v, parent, pslot, depth


def transport_simplex(a, b, C, tol, max_iter):
    """Network simplex for the balanced transportation problem.

    Returns ``(rows, cols, flow, iterations)`` for the final basis (which may
    contain zero-flow degenerate cells).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, m = C.shape
    rows, cols, flow = _northwest_corner(a, b)
    if n == 1 or m == 1:
        return rows, cols, flow, 0
    degenerate_run = 0
    it = 0
    while True:
        u, v, parent, pslot, depth = _tree_bfs(n, m, rows, cols, C)
        reduced = (C - u[:, None]) - v[None, :]
        flat = reduced.ravel()
        if degenerate_run > n + m:
            hits = np.flatnonzero(flat < -tol)
            if hits.shape[0] == 0:
                break
            e = int(hits[0])
        else:
            e = int(np.argmin(flat))
            if not flat[e] < -tol:
                break
        if it >= max_iter:
            raise RuntimeError("network simplex did not converge")
        it += 1
        ei, ej = e // m, e % m
        # tree path between row ei and column ej, walked up to the common ancestor
        x = ei
        y = n + ej
        up_x = []
        up_y = []
        while depth[x] > depth[y]:
            up_x.append(pslot[x])
            x = parent[x]
        while depth[y] > depth[x]:
            up_y.append(pslot[y])
            y = parent[y]
        while x != y:
            up_x.append(pslot[x])
            x = parent[x]
            up_y.append(pslot[y])
            y = parent[y]
        # cycle order after the entering cell: column side upward, then row side downward
        path = up_y + up_x[::-1]
        minus = path[0::2]
        plus = path[1::2]
        theta = flow[minus[0]]
        leave = minus[0]
        leave_key = rows[leave] * m + cols[leave]
        for s in minus[1:]:
            f = flow[s]
            key = rows[s] * m + cols[s]
            if f < theta or (f == theta and key < leave_key):
                theta = f
                leave = s
                leave_key = key
        for s in minus:
            flow[s] -= theta
        for s in plus:
            flow[s] += theta
        rows[leave] = ei
        cols[leave] = ej
        flow[leave] = theta
        if theta == 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0
    return rows, cols, flow, it


def longest_paths(W, L0, tol, max_rounds):
    """Synchronous Bellman-Ford relaxation for longest paths.

    ``L0`` holds initial labels (``-inf`` for unreached nodes).  Returns
    ``(L, pred, rounds, converged)``.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    L = np.array(L0, dtype=np.float64)
    n = L.shape[0]
    pred = np.full(n, -1, dtype=np.int64)
    for r in range(max_rounds):
        cand = L[:, None] + W
        best = np.argmax(cand, axis=0)
        val = cand[best, np.arange(n)]
        better = val > L + tol
        if not better.any():
            return L, pred, r, True
        L = np.where(better, val, L)
        pred = np.where(better, best, pred)
    return L, pred, max_rounds, False
