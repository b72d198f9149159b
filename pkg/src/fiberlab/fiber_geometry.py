"""Distance and scalar product between fields over a common base.

Both reduce to one exact transport problem per base point; the weighted
sums use :func:`math.fsum` so results do not depend on summation order.
"""

from __future__ import annotations

import math

import numpy as np

from .fields import FiberCoupling, FiberMeasure, MeasureField, gamma_of
from .measures import make_measure
from .ot_core import solve_ot, solve_transport, sq_dist_matrix


def _check_base(xi: MeasureField, zeta: MeasureField) -> None:
    if not xi.base.same_as(zeta.base):
        raise ValueError("fields live on different bases")


def fiber_coupling(f: FiberMeasure, g: FiberMeasure) -> np.ndarray:
    """Optimal ``(j, l, mass)`` rows between two fibers for ``|v - w|^2``."""
    C = sq_dist_matrix(f.velocities, g.velocities)
    rows, cols, mass = solve_transport(f.probs, g.probs, C)
    return np.column_stack([rows, cols, mass])


def optimal_fiber_coupling(xi: MeasureField, zeta: MeasureField) -> FiberCoupling:
    _check_base(xi, zeta)
    return FiberCoupling(xi, zeta, tuple(fiber_coupling(f, g) for f, g in zip(xi.fibers, zeta.fibers)))


def _per_fiber(coupling: FiberCoupling):
    sq, dots = [], []
    for e, f, g in zip(coupling.entries, coupling.left.fibers, coupling.right.fibers):
        v = f.velocities[e[:, 0].astype(int)]
        w = g.velocities[e[:, 1].astype(int)]
        diff = v - w
        sq.append(math.fsum(e[:, 2] * np.einsum("ij,ij->i", diff, diff)))
        dots.append(math.fsum(e[:, 2] * np.einsum("ij,ij->i", v, w)))
    return np.array(sq), np.array(dots)


def w_mu(xi: MeasureField, zeta: MeasureField) -> tuple[float, FiberCoupling]:
    """Fiberwise Wasserstein distance and the optimal fiber coupling.

    Raises
    ------
    ValueError
        If the bases differ.
    """
    coupling = optimal_fiber_coupling(xi, zeta)
    sq, _ = _per_fiber(coupling)
    return math.sqrt(max(math.fsum(xi.base.weights * sq), 0.0)), coupling


def w_mu_sq(xi: MeasureField, zeta: MeasureField) -> float:
    coupling = optimal_fiber_coupling(xi, zeta)
    sq, _ = _per_fiber(coupling)
    return math.fsum(xi.base.weights * sq)


def metric_dot(xi: MeasureField, zeta: MeasureField) -> float:
    """Base-weighted sum of per-fiber maximal correlations."""
    return metric_dot_fibers(xi, zeta).sum_weighted


class _FiberDots:
    def __init__(self, weights, dots, sq):
        self.per_fiber = dots
        self.sq = sq
        self.sum_weighted = math.fsum(weights * dots)
        self.w_sq = math.fsum(weights * sq)


def metric_dot_fibers(xi: MeasureField, zeta: MeasureField) -> _FiberDots:
    """Per-fiber maximal correlations and squared distances from one coupling."""
    coupling = optimal_fiber_coupling(xi, zeta)
    sq, dots = _per_fiber(coupling)
    return _FiberDots(xi.base.weights, dots, sq)


def norm(xi: MeasureField) -> float:
    return math.sqrt(xi.norm_sq())


def is_orthogonal_to_gamma(xi: MeasureField, f, tol: float = 1e-8) -> tuple[bool, float]:
    """Whether every atom velocity of a centred field is orthogonal to ``f(x)``.

    Raises
    ------
    ValueError
        If ``xi`` is not centred.
    """
    from .fields import barycenter

    if np.max(np.abs(barycenter(xi)), initial=0.0) > 1e-9:
        raise ValueError("field is not centred")
    vals = np.asarray(f(xi.base.points) if callable(f) else f, float).reshape(xi.base.size, -1)
    worst = 0.0
    for fib, fx in zip(xi.fibers, vals):
        worst = max(worst, float(np.max(np.abs(fib.velocities @ fx))))
    return worst <= tol, worst


def gamma_dot(xi: MeasureField, f) -> float:
    return metric_dot(xi, gamma_of(f, xi.base))


def bundle_distance(xi: MeasureField, zeta: MeasureField) -> float:
    """Wasserstein distance between the fields as measures on ``R^d x R^d``."""
    a = _flatten(xi)
    b = _flatten(zeta)
    return math.sqrt(max(solve_ot(a, b)[1], 0.0))


def _flatten(xi: MeasureField):
    X, V = xi.pairs()
    return make_measure(np.hstack([X, V]), xi.atom_weights())
