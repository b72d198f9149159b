"""Slow reference computations that share no code with the solvers they check."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .fixtures import SQUARE_SIDES, Bump


def _compositions(total: int, caps: tuple):
    """All integer vectors ``k`` with ``sum k = total`` and ``0 <= k <= caps``."""
    if not caps:
        if total == 0:
            yield ()
        return
    head, rest = caps[0], caps[1:]
    room = sum(rest)
    for k in range(max(0, total - room), min(head, total) + 1):
        for tail in _compositions(total - k, rest):
            yield (k,) + tail


def integer_coupling_min(a_units, b_units, C) -> tuple[float, np.ndarray]:
    """Minimum of ``sum C_ij k_ij / N`` over integer couplings of the unit counts.

    ``a_units`` and ``b_units`` are nonnegative integers with the same total
    ``N``. Transportation polytopes with integer margins have integer
    vertices, so this equals the continuous optimum. Dynamic programming over
    remaining column capacities, row by row.
    """
    a = tuple(int(v) for v in a_units)
    b = tuple(int(v) for v in b_units)
    if sum(a) != sum(b):
        raise ValueError("margins must have equal totals")
    N = sum(a)
    C = np.asarray(C, float)

    @lru_cache(maxsize=None)
    def best(i: int, caps: tuple):
        if i == len(a):
            return (0.0, ()) if not any(caps) else (math.inf, ())
        out = (math.inf, ())
        for k in _compositions(a[i], caps):
            rest, plan = best(i + 1, tuple(c - x for c, x in zip(caps, k)))
            val = math.fsum([rest] + [C[i, j] * x for j, x in enumerate(k) if x])
            if val < out[0]:
                out = (val, (k,) + plan)
        return out

    total, rows = best(0, b)
    return total / N, np.array(rows, dtype=int)


def _hessian_fd(bump: Bump, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    H = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        H[:, j] = (bump.grad(x + e)[0] - bump.grad(x - e)[0]) / (2 * h)
    return 0.5 * (H + H.T)


def square_midpoint_prediction(bump: Bump, n: int) -> float:
    """Leading-order value of the midpoint sum of ``grad phi . tangent`` over the square.

    The uniform measure puts ``1/(4n)`` on each of the ``n`` midpoints per
    side. Per side the exact integral telescopes; the midpoint rule adds
    ``-(h^2/24) [g'(1) - g'(0)]`` with ``g' = t^T H t``. Hessians come from
    central differences of the gradient.
    """
    h = 1.0 / n
    acc = []
    for start, t in SQUARE_SIDES:
        g1 = t @ _hessian_fd(bump, start + t) @ t
        g0 = t @ _hessian_fd(bump, start) @ t
        acc.append(g1 - g0)
    return -(h * h / 24.0) * math.fsum(acc) / 4.0


def square_boundary_integral(bump: Bump) -> float:
    """Adaptive quadrature of ``d/ds phi(gamma(s))`` around the square; zero in exact arithmetic."""
    parts = []
    for start, t in SQUARE_SIDES:
        parts.append(quad(lambda s: float(bump.grad(start + s * t)[0] @ t), 0.0, 1.0, epsabs=1e-13, limit=200)[0])
    return math.fsum(parts) / 4.0
