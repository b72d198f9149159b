# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: transportation network simplex and longest-path relaxation.

Every arithmetic step matches ``_kernels_py`` so the two backends agree bitwise.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef void _tree_bfs(Py_ssize_t n, Py_ssize_t m, Py_ssize_t nslots,
                    cnp.int64_t[::1] rows, cnp.int64_t[::1] cols,
                    const double[:, ::1] C,
                    cnp.int64_t[::1] start, cnp.int64_t[::1] fill, cnp.int64_t[::1] adj,
                    double[::1] u, double[::1] v,
                    cnp.int64_t[::1] parent, cnp.int64_t[::1] pslot,
                    cnp.int64_t[::1] depth, cnp.int64_t[::1] queue) noexcept nogil:
    cdef Py_ssize_t nn = n + m
    cdef Py_ssize_t s, p, node, other, r, c, head, tail
    for s in range(nn + 1):
        start[s] = 0
    for s in range(nslots):
        start[rows[s] + 1] += 1
        start[n + cols[s] + 1] += 1
    for s in range(nn):
        start[s + 1] += start[s]
    for s in range(nn):
        fill[s] = start[s]
    for s in range(nslots):
        r = rows[s]
        c = n + cols[s]
        adj[fill[r]] = s
        fill[r] += 1
        adj[fill[c]] = s
        fill[c] += 1
    for s in range(n):
        u[s] = 0.0
    for s in range(m):
        v[s] = 0.0
    for s in range(nn):
        parent[s] = -1
        pslot[s] = -1
        depth[s] = -1
    queue[0] = 0
    depth[0] = 0
    head = 0
    tail = 1
    while head < tail:
        node = queue[head]
        head += 1
        for p in range(start[node], start[node + 1]):
            s = adj[p]
            if node < n:
                other = n + cols[s]
            else:
                other = rows[s]
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


def transport_simplex(a, b, C, double tol, long max_iter):
    """Network simplex for the balanced transportation problem.

    Returns ``(rows, cols, flow, iterations)`` for the final basis.
    """
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n = Cv.shape[0]
    cdef Py_ssize_t m = Cv.shape[1]
    cdef Py_ssize_t nslots = n + m - 1
    cdef Py_ssize_t nn = n + m

    rows_a = np.empty(nslots, dtype=np.int64)
    cols_a = np.empty(nslots, dtype=np.int64)
    flow_a = np.empty(nslots, dtype=np.float64)
    cdef cnp.int64_t[::1] rows = rows_a
    cdef cnp.int64_t[::1] cols = cols_a
    cdef double[::1] flow = flow_a

    ra_a = np.array(av, dtype=np.float64)
    rb_a = np.array(bv, dtype=np.float64)
    cdef double[::1] ra = ra_a
    cdef double[::1] rb = rb_a
    cdef Py_ssize_t i = 0, j = 0, k
    cdef double x
    cdef bint move_row
    for k in range(nslots):
        x = ra[i] if ra[i] < rb[j] else rb[j]
        rows[k] = i
        cols[k] = j
        flow[k] = x
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
    if n == 1 or m == 1:
        return rows_a, cols_a, flow_a, 0

    cdef cnp.int64_t[::1] start = np.empty(nn + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] fill = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] adj = np.empty(2 * nslots, dtype=np.int64)
    cdef double[::1] u = np.empty(n, dtype=np.float64)
    cdef double[::1] v = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[::1] parent = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] pslot = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] depth = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] up_x = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] up_y = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] path = np.empty(nn, dtype=np.int64)

    cdef long degenerate_run = 0
    cdef long it = 0
    cdef Py_ssize_t e, ei, ej, nx, ny, plen, q, s, leave, xn, yn
    cdef double best, rc, theta, f
    cdef cnp.int64_t key, leave_key
    cdef bint found, bland

    while True:
        with nogil:
            _tree_bfs(n, m, nslots, rows, cols, Cv, start, fill, adj, u, v,
                      parent, pslot, depth, queue)
            bland = degenerate_run > n + m
            found = False
            e = -1
            best = 0.0
            for i in range(n):
                for j in range(m):
                    rc = (Cv[i, j] - u[i]) - v[j]
                    if bland:
                        if rc < -tol:
                            e = i * m + j
                            found = True
                            break
                    else:
                        if e < 0 or rc < best:
                            best = rc
                            e = i * m + j
                if bland and found:
                    break
            if not bland:
                found = best < -tol
        if not found:
            break
        if it >= max_iter:
            raise RuntimeError("network simplex did not converge")
        it += 1
        with nogil:
            ei = e // m
            ej = e % m
            xn = ei
            yn = n + ej
            nx = 0
            ny = 0
            while depth[xn] > depth[yn]:
                up_x[nx] = pslot[xn]
                nx += 1
                xn = parent[xn]
            while depth[yn] > depth[xn]:
                up_y[ny] = pslot[yn]
                ny += 1
                yn = parent[yn]
            while xn != yn:
                up_x[nx] = pslot[xn]
                nx += 1
                xn = parent[xn]
                up_y[ny] = pslot[yn]
                ny += 1
                yn = parent[yn]
            plen = 0
            for q in range(ny):
                path[plen] = up_y[q]
                plen += 1
            for q in range(nx - 1, -1, -1):
                path[plen] = up_x[q]
                plen += 1
            leave = path[0]
            theta = flow[leave]
            leave_key = rows[leave] * m + cols[leave]
            for q in range(2, plen, 2):
                s = path[q]
                f = flow[s]
                key = rows[s] * m + cols[s]
                if f < theta or (f == theta and key < leave_key):
                    theta = f
                    leave = s
                    leave_key = key
            for q in range(0, plen, 2):
                flow[path[q]] -= theta
            for q in range(1, plen, 2):
                flow[path[q]] += theta
            rows[leave] = ei
            cols[leave] = ej
            flow[leave] = theta
            if theta == 0.0:
                degenerate_run += 1
            else:
                degenerate_run = 0
    return rows_a, cols_a, flow_a, it


def longest_paths(W, L0, double tol, long max_rounds):
    """Synchronous Bellman-Ford relaxation for longest paths.

    Returns ``(L, pred, rounds, converged)``.
    """
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    L_a = np.array(L0, dtype=np.float64)
    cdef double[::1] L = L_a
    cdef Py_ssize_t n = L.shape[0]
    pred_a = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] pred = pred_a
    cdef double[::1] newL = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] newp = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t a, b, arg
    cdef long r
    cdef double val, c
    cdef bint any_better
    for r in range(max_rounds):
        any_better = False
        with nogil:
            for b in range(n):
                arg = 0
                val = L[0] + Wv[0, b]
                for a in range(1, n):
                    c = L[a] + Wv[a, b]
                    if c > val:
                        val = c
                        arg = a
                if val > L[b] + tol:
                    newL[b] = val
                    newp[b] = arg
                    any_better = True
                else:
                    newL[b] = L[b]
                    newp[b] = pred[b]
            if any_better:
                for b in range(n):
                    L[b] = newL[b]
                    pred[b] = newp[b]
        if not any_better:
            return L_a, pred_a, r, True
    return L_a, pred_a, max_rounds, False
