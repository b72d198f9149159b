"""Exact optimal transport for the squared Euclidean cost.

The solver is a transportation network simplex (see :mod:`fiberlab.kernels`)
with Dantzig pricing, smallest-index leaving rule and a switch to Bland's
rule on long degenerate runs, so results are deterministic.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .measures import DiscreteMeasure, make_measure


class NotCyclicallyMonotoneError(ValueError):
    """Raised when a support admits a cost-decreasing cyclic rearrangement."""


def sq_dist_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _closed_form_2x2(a, b, C):
    lo = max(0.0, a[0] - b[1])
    hi = min(a[0], b[0])
    slope = (C[0, 0] - C[0, 1]) - (C[1, 0] - C[1, 1])
    t = hi if slope < 0 else lo
    rows = np.array([0, 0, 1, 1])
    cols = np.array([0, 1, 0, 1])
    flow = np.array([t, a[0] - t, b[0] - t, a[1] - b[0] + t])
    return rows, cols, np.maximum(flow, 0.0)


def solve_transport(a, b, C, tol: float | None = None):
    """Optimal coupling of weight vectors ``a`` and ``b`` for cost matrix ``C``.

    Returns ``(rows, cols, mass)`` sorted by ``(row, col)`` with strictly
    positive masses.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    n, m = C.shape
    if n == 2 and m == 2:
        rows, cols, flow = _closed_form_2x2(a, b, C)
    else:
        scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
        if tol is None:
            tol = 1e-12 * scale
        rows, cols, flow, _ = kernels.transport_simplex(a, b, C, tol, 50 * (n + m) ** 2 + 1000)
    dust = 1e-13 * min(float(a.min()), float(b.min()))
    keep = flow > dust
    rows, cols, flow = rows[keep], cols[keep], flow[keep]
    order = np.lexsort((cols, rows))
    return rows[order].astype(np.int64), cols[order].astype(np.int64), flow[order]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling between ``source`` and ``target`` stored as sparse entries."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        mass = np.asarray(self.masses, dtype=np.float64)
        if np.any(mass <= 0):
            raise ValueError("plan masses must be positive")
        rs = np.bincount(rows, weights=mass, minlength=self.source.size)
        cs = np.bincount(cols, weights=mass, minlength=self.target.size)
        if np.max(np.abs(rs - self.source.weights)) > 1e-10:
            raise ValueError("plan row sums differ from source weights")
        if np.max(np.abs(cs - self.target.weights)) > 1e-10:
            raise ValueError("plan column sums differ from target weights")
        for name, arr in (("rows", rows), ("cols", cols), ("masses", mass)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def x(self) -> np.ndarray:
        return self.source.points[self.rows]

    @property
    def y(self) -> np.ndarray:
        return self.target.points[self.cols]

    def cost(self) -> float:
        diff = self.x - self.y
        return math.fsum(self.masses * np.einsum("ij,ij->i", diff, diff))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.source.size, self.target.size))
        np.add.at(out, (self.rows, self.cols), self.masses)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.source.dim
        w.writerow(["i", "j", "mass"] + [f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)])
        for i, j, m in zip(self.rows, self.cols, self.masses):
            w.writerow([int(i), int(j), f"{m:.17g}"]
                       + [f"{c:.17g}" for c in self.source.points[i]]
                       + [f"{c:.17g}" for c in self.target.points[j]])
        return buf.getvalue()


def solve_ot(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[TransportPlan, float]:
    """Optimal plan for the cost ``|x - y|^2`` and its cost.

    Raises
    ------
    ValueError
        If the measures live in different dimensions.
    """
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    C = sq_dist_matrix(mu.points, nu.points)
    rows, cols, mass = solve_transport(mu.weights, nu.weights, C)
    plan = TransportPlan(mu, nu, rows, cols, mass)
    return plan, math.fsum(mass * C[rows, cols])


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return math.sqrt(max(solve_ot(mu, nu)[1], 0.0))


# --- cyclical monotonicity ----------------------------------------------------


def _swap_gain_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``G[a, b] = |x_a - y_a|^2 - |x_b - y_a|^2``; a cycle's total is its saving."""
    own = np.einsum("ij,ij->i", x - y, x - y)
    return own[:, None] - sq_dist_matrix(y, x)


def _cycle_weight(G: np.ndarray, cycle: Sequence[int]) -> float:
    return math.fsum(G[cycle[t], cycle[(t + 1) % len(cycle)]] for t in range(len(cycle)))


def _positive_cycle_from_pred(G, pred, tol):
    n = pred.shape[0]
    best = None
    for start in range(n):
        node = start
        for _ in range(n):
            if node < 0:
                break
            node = pred[node]
        if node < 0:
            continue
        cycle = [node]
        nxt = pred[node]
        while nxt != node and len(cycle) <= n:
            cycle.append(nxt)
            nxt = pred[nxt]
        cycle = cycle[::-1]  # pred points backwards along edges
        w = _cycle_weight(G, cycle)
        if w > tol and (best is None or w > best[1]):
            best = (cycle, w)
    return best


def _enumerate_cycles(G, L, tol):
    n = G.shape[0]
    worst = 0.0
    for length in range(2, min(L, n) + 1):
        for subset in itertools.combinations(range(n), length):
            head, rest = subset[0], subset[1:]
            for perm in itertools.permutations(rest):
                w = _cycle_weight(G, (head,) + perm)
                if w > worst:
                    worst = w
    return worst if worst > tol else 0.0


def _walk_search(G, L, tol):
    """Max-plus powers for closed walks with at most ``L`` edges."""
    n = G.shape[0]
    P = G.copy()
    args = []
    for _ in range(L - 1):
        cand = P[:, :, None] + G[None, :, :]
        arg = np.argmax(cand, axis=1)
        P = np.take_along_axis(cand, arg[:, None, :], axis=1)[:, 0, :]
        args.append(arg)
    diag = np.diag(P)
    i = int(np.argmax(diag))
    if diag[i] <= tol:
        return 0.0
    # rebuild the walk i -> ... -> i backwards through the stored argmaxes
    walk = [i]
    node = i
    for arg in reversed(args):
        node = int(arg[i, node])
        walk.append(node)
    walk.append(i)
    walk = walk[::-1]
    best = 0.0
    stack: list[int] = []
    for v in walk:
        if v in stack:
            k = stack.index(v)
            cyc = stack[k:]
            if len(cyc) >= 2:
                best = max(best, _cycle_weight(G, cyc))
            stack = stack[: k + 1]
        else:
            stack.append(v)
    return best if best > tol else float(diag[i])


def is_cyclically_monotone(pairs, L: int | None = None, tol: float = 1e-10) -> tuple[bool, float]:
    """Check ``sum |x_i - y_i|^2 <= sum |x_i - y_sigma(i)|^2`` over cycles of length <= L.

    Parameters
    ----------
    pairs
        Sequence of ``(x, y)`` or a tuple of arrays ``(X, Y)``.
    L
        Longest cycle considered; defaults to the number of pairs.
    tol
        Savings below ``tol * scale`` count as zero.

    Returns
    -------
    (bool, float)
        Verdict and the largest saving found. The saving is exact for up to
        seven pairs; beyond that it is the saving of a certified violating
        cycle (0 whenever the set is monotone).
    """
    X, Y = _as_pair_arrays(pairs)
    n = X.shape[0]
    if L is not None and L < 2:
        raise ValueError("cycle length must be at least 2")
    if n < 2:
        return True, 0.0
    if L is None:
        L = n
    G = _swap_gain_matrix(X, Y)
    scale = max(1.0, float(np.max(np.abs(G))))
    eps = tol * scale
    if n <= 7:
        worst = _enumerate_cycles(G, L, eps)
        return worst == 0.0, worst
    if L < n:
        worst = _walk_search(G, L, eps)
        return worst == 0.0, worst
    lab, pred, _, ok = kernels.longest_paths(G, np.zeros(n), eps, n + 1)
    if ok:
        return True, 0.0
    for _ in range(4):
        found = _positive_cycle_from_pred(G, pred, eps)
        if found is not None:
            return False, found[1]
        lab, pred, _, _ = kernels.longest_paths(G, lab, eps, n)
    return False, float(eps)


def _as_pair_arrays(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray) \
            and pairs[0].ndim == 2:
        return np.asarray(pairs[0], float), np.asarray(pairs[1], float)
    pairs = list(pairs)
    if not pairs:
        return np.zeros((0, 1)), np.zeros((0, 1))
    X = np.array([np.atleast_1d(np.asarray(p[0], float)) for p in pairs])
    Y = np.array([np.atleast_1d(np.asarray(p[1], float)) for p in pairs])
    return X, Y


# --- explicit potential on chains -----------------------------------------------


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Chain potential of a monotone support, pinned at ``anchor``.

    ``dual_values[b]`` is the conjugate value at the target ``x_b + tau v_b``;
    the potential is ``phi(q) = max_b dual_values[b] - |q - target_b|^2 / (2 tau)``.
    """

    values: np.ndarray
    anchor: int
    tau: float
    queries: np.ndarray
    support_x: np.ndarray
    support_targets: np.ndarray
    dual_values: np.ndarray
    support_values: np.ndarray

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, float))
        return np.max(self._pieces(q), axis=1)

    def _pieces(self, q: np.ndarray) -> np.ndarray:
        return self.dual_values[None, :] - sq_dist_matrix(q, self.support_targets) / (2 * self.tau)

    def argmax_targets(self, q: np.ndarray, allowed: np.ndarray | None = None) -> np.ndarray:
        """Index of a maximizing piece per query row (lowest index among ties)."""
        q = np.atleast_2d(np.asarray(q, float))
        vals = self._pieces(q)
        if allowed is not None:
            vals = np.where(np.asarray(allowed, bool)[None, :], vals, -np.inf)
        best = np.max(vals, axis=1, keepdims=True)
        slack = 1e-12 * np.maximum(1.0, np.abs(best))
        return np.argmax(vals >= best - slack, axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.queries.shape[1]
        w.writerow([f"p{k}" for k in range(d)] + ["value"])
        for q, val in zip(self.queries, self.values):
            w.writerow([f"{c:.17g}" for c in q] + [f"{val:.17g}"])
        return buf.getvalue()


def kantorovich_potential(support, tau: float = 1.0, queries=None) -> PotentialTable:
    """Longest-path potential of a finite set of ``(x, v)`` pairs.

    The value at ``q`` is the supremum over chains starting at the anchor
    (the first pair) of the accumulated cyclic savings, ended at ``q``, and
    scaled by ``1/(2 tau)``. It is zero at the anchor and satisfies
    ``phi(y) >= phi(x) + <v, y - x> - |y - x|^2/(2 tau)`` for every pair.

    Raises
    ------
    NotCyclicallyMonotoneError
        When the relaxation finds a positive cycle.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    X, V = _as_pair_arrays(support)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty support")
    targets = X + tau * V
    G = _swap_gain_matrix(X, targets)
    scale = max(1.0, float(np.max(np.abs(G))))
    L0 = np.full(n, -np.inf)
    L0[0] = 0.0
    lab, _, _, ok = kernels.longest_paths(G, L0, 1e-12 * scale, n + 1)
    if not ok or lab[0] > 1e-9 * scale:
        raise NotCyclicallyMonotoneError("support is not cyclically monotone")
    sq_step = np.einsum("ij,ij->i", targets - X, targets - X)
    dual = (lab + sq_step) / (2 * tau)
    q = X if queries is None else np.atleast_2d(np.asarray(queries, float))
    table = PotentialTable(
        values=np.zeros(q.shape[0]), anchor=0, tau=float(tau), queries=q,
        support_x=X, support_targets=targets, dual_values=dual,
        support_values=np.zeros(n),
    )
    object.__setattr__(table, "values", table.evaluate(q))
    object.__setattr__(table, "support_values", table.evaluate(X))
    return table


# --- plan surgery ----------------------------------------------------------------


def extend_optimal_plan(eta, mu2: DiscreteMeasure, lam: float):
    """Add the new source ``mu2`` to an optimal velocity field ``eta``.

    Each point of ``mu2`` is sent to a maximizing target of the chain
    potential of ``eta``'s support; the result is ``(1 - lam) eta + lam gamma``.
    """
    from .fields import MeasureField, FiberMeasure, superpose

    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    X, V = eta.pairs()
    if not is_cyclically_monotone((X, X + V))[0]:
        raise NotCyclicallyMonotoneError("eta is not cyclically monotone")
    pot = kantorovich_potential((X, V), 1.0)
    pick = pot.argmax_targets(mu2.points)
    vel = pot.support_targets[pick] - mu2.points
    gamma = MeasureField(mu2, tuple(FiberMeasure.single(v) for v in vel))
    if lam == 0.0:
        return eta
    if lam == 1.0:
        return gamma
    return superpose([(1.0 - lam, eta), (lam, gamma)])


def truncate_plan(eta: TransportPlan, R: float) -> TransportPlan:
    """Keep entries whose target lies in the closed ball of radius ``R``.

    Mass of the other entries is rerouted to the target maximizing the
    chain potential among the kept targets.

    Raises
    ------
    ValueError
        If no target lies in the ball.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    X, Y = eta.x, eta.y
    inside = np.linalg.norm(Y, axis=1) <= R * (1 + 1e-12)
    if not inside.any():
        raise ValueError("no target inside the ball")
    if inside.all():
        return eta
    pot = kantorovich_potential((X, Y - X), 1.0)
    new_y = Y.copy()
    moved = np.flatnonzero(~inside)
    pick = pot.argmax_targets(X[moved], allowed=inside)
    new_y[moved] = pot.support_targets[pick]
    target = make_measure(new_y, eta.masses)
    lookup = {k.tobytes(): j for j, k in enumerate(np.round(target.points, 12) + 0.0)}
    cols = np.array([lookup[k.tobytes()] for k in np.round(new_y, 12) + 0.0])
    rows = eta.rows
    key = rows * target.size + cols
    uniq, inv = np.unique(key, return_inverse=True)
    mass = np.bincount(inv.reshape(-1), weights=eta.masses)
    return TransportPlan(eta.source, target, uniq // target.size, uniq % target.size, mass)
