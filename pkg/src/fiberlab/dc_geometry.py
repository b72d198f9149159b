"""Graphs of differences of convex functions and their convex companions.

Convex (or semiconvex) functions are oracles that report, at a point, a set
of generators whose convex hull is the subdifferential.  For max-affine
pieces the generators are the gradients of the active planes, decided with
an activity tolerance of 1e-10.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cones import max_principal_angle, orthonormal_rows

ACTIVE_TOL = 1e-10
NONDIFFERENTIABLE = "nondifferentiable"


class HypothesisError(ValueError):
    """A hypothesis of a geometric check does not hold at the given point."""


class ConvexOracle:
    """Base class. Subclasses define ``value``, ``generators`` and ``dim``."""

    tag = "abstract"
    semiconvexity = 0.0
    dim: int

    def value(self, x) -> float:
        raise NotImplementedError

    def generators(self, x) -> np.ndarray:
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        return self.generators(x)[0]

    def is_differentiable(self, x) -> bool:
        return self.generators(x).shape[0] == 1

    def __call__(self, x) -> float:
        return self.value(x)


class MaxAffine(ConvexOracle):
    """``x -> max_i <a_i, x> + b_i``."""

    tag = "max-affine"

    def __init__(self, slopes, offsets):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=np.float64))
        self.offsets = np.asarray(offsets, dtype=np.float64).reshape(-1)
        if self.slopes.shape[0] != self.offsets.shape[0]:
            raise ValueError("one offset per plane is required")
        self.dim = self.slopes.shape[1]

    @classmethod
    def from_planes(cls, planes) -> "MaxAffine":
        P = np.atleast_2d(np.asarray(planes, dtype=np.float64))
        return cls(P[:, :-1], P[:, -1])

    def _vals(self, x):
        return self.slopes @ np.atleast_1d(np.asarray(x, float)) + self.offsets

    def value(self, x) -> float:
        return float(np.max(self._vals(x)))

    def generators(self, x) -> np.ndarray:
        vals = self._vals(x)
        active = vals >= vals.max() - ACTIVE_TOL
        return _unique_rows(self.slopes[active])


class Quadratic(ConvexOracle):
    """``x -> x^T Q x / 2 + <q, x> + c``; semiconvex when ``Q`` is indefinite."""

    tag = "smooth"

    def __init__(self, Q, q=None, c=0.0):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        self.Q = 0.5 * (self.Q + self.Q.T)
        self.dim = self.Q.shape[0]
        self.q = np.zeros(self.dim) if q is None else np.asarray(q, float).reshape(-1)
        self.c = float(c)
        self.semiconvexity = max(0.0, -float(np.min(np.linalg.eigvalsh(self.Q))))

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, float))
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.c)

    def generators(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        return (self.Q @ x + self.q)[None, :]


class SmoothFunction(ConvexOracle):
    """Smooth function given by value and gradient callables."""

    tag = "smooth"

    def __init__(self, dim: int, fn: Callable, grad: Callable, semiconvexity: float = 0.0):
        self.dim = dim
        self._fn = fn
        self._grad = grad
        self.semiconvexity = semiconvexity

    def value(self, x) -> float:
        return float(self._fn(np.atleast_1d(np.asarray(x, float))))

    def generators(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._grad(np.atleast_1d(np.asarray(x, float))), float))[None, :]


class Sum(ConvexOracle):
    tag = "sum"

    def __init__(self, terms: Sequence[ConvexOracle]):
        if not terms:
            raise ValueError("empty sum")
        self.terms = list(terms)
        self.dim = self.terms[0].dim
        self.semiconvexity = sum(t.semiconvexity for t in self.terms)

    def value(self, x) -> float:
        return math.fsum(t.value(x) for t in self.terms)

    def generators(self, x) -> np.ndarray:
        out = np.zeros((1, self.dim))
        for t in self.terms:
            g = t.generators(x)
            out = _unique_rows((out[:, None, :] + g[None, :, :]).reshape(-1, self.dim))
        return out


class PointwiseMax(ConvexOracle):
    tag = "max"

    def __init__(self, terms: Sequence[ConvexOracle]):
        self.terms = list(terms)
        self.dim = self.terms[0].dim
        self.semiconvexity = max(t.semiconvexity for t in self.terms)

    def values(self, x) -> np.ndarray:
        return np.array([t.value(x) for t in self.terms])

    def value(self, x) -> float:
        return float(np.max(self.values(x)))

    def active(self, x) -> np.ndarray:
        vals = self.values(x)
        return vals >= vals.max() - ACTIVE_TOL

    def generators(self, x) -> np.ndarray:
        act = self.active(x)
        return _unique_rows(np.vstack([t.generators(x) for t, a in zip(self.terms, act) if a]))


class Lifted(ConvexOracle):
    """``x in R^d -> inner(x[coords]) + <linear, x>``."""

    tag = "lifted"

    def __init__(self, inner: ConvexOracle, coords: Sequence[int], dim: int, linear=None):
        self.inner = inner
        self.coords = np.asarray(coords, dtype=np.int64)
        self.dim = dim
        self.linear = np.zeros(dim) if linear is None else np.asarray(linear, float)
        self.semiconvexity = inner.semiconvexity

    def value(self, x) -> float:
        x = np.asarray(x, float)
        return self.inner.value(x[self.coords]) + float(self.linear @ x)

    def generators(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        g = self.inner.generators(x[self.coords])
        out = np.tile(self.linear, (g.shape[0], 1))
        out[:, self.coords] += g
        return out


class BlackBox(ConvexOracle):
    """Value-only oracle; subdifferentials are probed numerically."""

    tag = "black-box"

    def __init__(self, dim: int, fn: Callable):
        self.dim = dim
        self._fn = fn

    def value(self, x) -> float:
        return float(self._fn(np.atleast_1d(np.asarray(x, float))))

    def generators(self, x) -> np.ndarray:
        raise NotImplementedError("black-box oracle has no analytic subdifferential")


def _unique_rows(G: np.ndarray) -> np.ndarray:
    if G.shape[0] <= 1:
        return G
    _, idx = np.unique(np.round(G, 12) + 0.0, axis=0, return_index=True)
    return G[np.sort(idx)]


def _affine_rank(G: np.ndarray, svd_tol: float) -> tuple[int, np.ndarray]:
    if G.shape[0] <= 1:
        return 0, np.zeros((0, G.shape[1]))
    D = G[1:] - G[0]
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    scale = max(1.0, float(np.max(np.abs(G))))
    rank = int(np.sum(s > svd_tol * scale))
    return rank, vt[:rank]


def subdiff_dim(phi: ConvexOracle, x, probe_radius: float = 1e-6, svd_tol: float = 1e-9,
                n_probes: int = 64, seed: int = 0) -> int:
    """Dimension of the affine hull of the subdifferential at ``x``.

    Analytic for the structured oracles; for a :class:`BlackBox` the limiting
    gradients are estimated by central differences at random probe points
    within ``probe_radius``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    if isinstance(phi, BlackBox):
        rng = np.random.default_rng(seed)
        h = probe_radius * 1e-3
        grads = []
        for _ in range(n_probes):
            u = rng.normal(size=phi.dim)
            y = x + probe_radius * rng.random() * u / np.linalg.norm(u)
            g = [(phi.value(y + h * e) - phi.value(y - h * e)) / (2 * h) for e in np.eye(phi.dim)]
            grads.append(g)
        G = np.array(grads)
        rank, _ = _affine_rank(G, max(svd_tol, 1e-4))
        return rank
    if not isinstance(phi, ConvexOracle):
        raise TypeError("unsupported representation")
    return _affine_rank(phi.generators(x), svd_tol)[0]


# --- charts ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DCParametrization:
    """Coordinate-permuted graph ``X -> (X, phi_j(X) - psi_j(X))`` of ``R^k`` in ``R^d``.

    ``permutation[i]`` is the ambient position of graph coordinate ``i``;
    the first ``k`` graph coordinates are the parameters.
    """

    k: int
    permutation: tuple
    phis: tuple
    psis: tuple

    def __post_init__(self):
        perm = tuple(int(p) for p in self.permutation)
        d = len(perm)
        if sorted(perm) != list(range(d)):
            raise ValueError("permutation must be a permutation of range(d)")
        if not 0 <= self.k <= d or len(self.phis) != d - self.k or len(self.psis) != d - self.k:
            raise ValueError("need one (phi, psi) pair per normal coordinate")
        for f in tuple(self.phis) + tuple(self.psis):
            if f.dim != self.k:
                raise ValueError("coordinate oracles must act on R^k")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "phis", tuple(self.phis))
        object.__setattr__(self, "psis", tuple(self.psis))

    @property
    def d(self) -> int:
        return len(self.permutation)

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_1d(np.asarray(X, float))
        z = np.concatenate([X, [f.value(X) - g.value(X) for f, g in zip(self.phis, self.psis)]])
        out = np.empty(self.d)
        out[list(self.permutation)] = z
        return out

    def preimage(self, x) -> np.ndarray:
        return np.asarray(x, float)[list(self.permutation[: self.k])]

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, float)
        return bool(np.max(np.abs(self.evaluate(self.preimage(x)) - x)) <= tol * (1 + np.max(np.abs(x))))

    def jacobian(self, X):
        """``d x k`` Jacobian, or :data:`NONDIFFERENTIABLE` at a kink of any piece."""
        X = np.atleast_1d(np.asarray(X, float))
        rows = [np.eye(self.k)]
        for f, g in zip(self.phis, self.psis):
            gf, gg = f.generators(X), g.generators(X)
            if gf.shape[0] != 1 or gg.shape[0] != 1:
                return NONDIFFERENTIABLE
            rows.append((gf[0] - gg[0])[None, :])
        Jz = np.vstack(rows)
        J = np.empty_like(Jz)
        J[list(self.permutation)] = Jz
        return J


def dc_eval(chart: DCParametrization, X) -> np.ndarray:
    return chart.evaluate(X)


def dc_jacobian(chart: DCParametrization, X):
    return chart.jacobian(X)


def graph_chart(k: int, phis, psis=None, permutation=None) -> DCParametrization:
    """Chart with the identity permutation unless one is given."""
    phis = list(phis)
    d = k + len(phis)
    if psis is None:
        psis = [MaxAffine(np.zeros((1, k)), [0.0]) for _ in phis]
    perm = tuple(range(d)) if permutation is None else tuple(permutation)
    return DCParametrization(k, perm, tuple(phis), tuple(psis))


@dataclass(frozen=True)
class TangentPlaneReport:
    exists: bool
    plane: np.ndarray
    defects: tuple


def tangent_plane(charts: Sequence[DCParametrization], x, angle_tol: float = 1e-8) -> TangentPlaneReport:
    """Common tangent plane of several charts through ``x``.

    Raises
    ------
    ValueError
        If ``x`` is not on every chart.
    """
    x = np.asarray(x, float)
    planes = []
    for ch in charts:
        if not ch.contains(x):
            raise ValueError("point is not on the chart")
        J = ch.jacobian(ch.preimage(x))
        if isinstance(J, str):
            return TangentPlaneReport(False, np.zeros((0, x.shape[0])), ())
        planes.append(orthonormal_rows(J.T, x.shape[0]))
    defects = tuple(max_principal_angle(planes[0], P) for P in planes)
    worst = max(
        (max_principal_angle(P, Q) for P, Q in itertools.combinations(planes, 2)), default=0.0
    )
    return TangentPlaneReport(worst <= angle_tol, planes[0], defects)


# --- the separating convex function ------------------------------------------------


@dataclass(frozen=True, eq=False)
class SeparatingConvex:
    """``phi = sum_j max(x_j + psi_j(X), phi_j(X))`` with explicit selections."""

    chart: DCParametrization
    phi: Sum
    pieces: tuple

    def selection(self, index: int) -> Callable[[np.ndarray], np.ndarray]:
        """Selection ``index`` in ``0..d-k``: 0 prefers every lower piece, ``j`` lifts normal ``j``."""
        return lambda x: self._select(np.asarray(x, float), index)

    def selections(self) -> list:
        return [self.selection(i) for i in range(self.chart.d - self.chart.k + 1)]

    def _select(self, x, index):
        out = np.zeros(self.chart.d)
        for j, piece in enumerate(self.pieces):
            up, down = piece.terms
            act = piece.active(x)
            prefer_up = index == j + 1
            use_up = (prefer_up and act[0]) or not act[1]
            out += (up if use_up else down).subgradient(x)
        return out


def build_separating_convex(chart: DCParametrization) -> SeparatingConvex:
    """Convex function whose subdifferential splits along the normals of the chart.

    Raises
    ------
    ValueError
        When the chart is full dimensional.
    """
    k, d = chart.k, chart.d
    if k >= d:
        raise ValueError("a full-dimensional chart has no normal direction")
    params = list(chart.permutation[:k])
    pieces = []
    for j, (f, g) in enumerate(zip(chart.phis, chart.psis)):
        e = np.zeros(d)
        e[chart.permutation[k + j]] = 1.0
        up = Lifted(g, params, d, linear=e)
        down = Lifted(f, params, d)
        pieces.append(PointwiseMax([up, down]))
    return SeparatingConvex(chart, Sum(pieces), tuple(pieces))


def _separated_subset(G: np.ndarray, count: int, eps: float) -> bool:
    """Whether ``count`` generators can be picked pairwise at least ``eps`` apart."""
    if G.shape[0] < count:
        return False
    for combo in itertools.combinations(range(G.shape[0]), count):
        pts = G[list(combo)]
        dmat = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        if np.all(dmat[np.triu_indices(count, 1)] >= eps):
            return True
    return False


def check_affine_ortho(phi: ConvexOracle, chart: DCParametrization, x, tol: float = 1e-8,
                       eps: float = 1e-2, radius: float = 1e-3, n_samples: int = 8,
                       svd_tol: float = 1e-9) -> float:
    """Largest cosine between chart tangents and the span of ``subdiff phi(x) - p``.

    Raises
    ------
    HypothesisError
        If ``x`` is off the chart, the chart has no Jacobian there, the
        subdifferential has the wrong dimension, or the separation fails on
        the sampled neighbours.
    """
    x = np.asarray(x, float)
    k, d = chart.k, chart.d
    if not chart.contains(x):
        raise HypothesisError("point is not on the chart")
    X = chart.preimage(x)
    J = chart.jacobian(X)
    if isinstance(J, str):
        raise HypothesisError("chart is not differentiable at the point")
    G = phi.generators(x)
    rank, span = _affine_rank(G, svd_tol)
    if rank != d - k:
        raise HypothesisError(f"subdifferential has dimension {rank}, expected {d - k}")
    offsets = [np.zeros(k)]
    for t in range(n_samples):
        ang = 2 * math.pi * t / n_samples
        u = np.array([math.cos(ang), math.sin(ang)] + [0.0] * max(0, k - 2))[:k] if k else np.zeros(0)
        if k == 1:
            u = np.array([1.0 if t % 2 == 0 else -1.0]) * (1 + t // 2) / n_samples
        offsets.append(radius * u)
    for off in offsets:
        y = chart.evaluate(X + off)
        if not _separated_subset(phi.generators(y), d - k + 1, eps):
            raise HypothesisError("separation of subgradients fails near the point")
    worst = 0.0
    for col in J.T:
        c = col / np.linalg.norm(col)
        worst = max(worst, float(np.linalg.norm(span @ c)))
    return worst


# --- composition of curves into graphs ---------------------------------------------


def _kinks_1d(slopes, offsets, lo, hi):
    out = []
    for (a1, b1), (a2, b2) in itertools.combinations(zip(slopes, offsets), 2):
        if a1 != a2:
            s = (b2 - b1) / (a1 - a2)
            if lo < s < hi:
                out.append(s)
    return out


def _pl_breakpoints(oracle: ConvexOracle, z0, dz, lo, hi):
    """Candidate kinks in ``s`` of ``oracle(z0 + s dz)`` on ``(lo, hi)``."""
    if isinstance(oracle, MaxAffine):
        return _kinks_1d(oracle.slopes @ dz, oracle.slopes @ z0 + oracle.offsets, lo, hi)
    if isinstance(oracle, Sum):
        return [s for t in oracle.terms for s in _pl_breakpoints(t, z0, dz, lo, hi)]
    raise TypeError("composition is implemented for max-affine pieces only")


def _pl_to_dc(ss, hs):
    """Difference of max-affine sums matching the piecewise linear data."""
    slopes = np.diff(hs) / np.diff(ss)
    lin = MaxAffine([[slopes[0]]], [hs[0] - slopes[0] * ss[0]])
    pos, neg = [lin], [MaxAffine([[0.0]], [0.0])]
    for s, jump in zip(ss[1:-1], np.diff(slopes)):
        if jump > 0:
            pos.append(MaxAffine([[0.0], [jump]], [0.0, -jump * s]))
        elif jump < 0:
            neg.append(MaxAffine([[0.0], [-jump]], [0.0, jump * s]))
    return Sum(pos), Sum(neg)


def compose_dc_curve(outer: DCParametrization, inner: DCParametrization, window) -> DCParametrization:
    """Chart of ``s -> outer(inner(s))`` on ``window = (lo, hi)`` for max-affine pieces."""
    if inner.k != 1 or inner.d != outer.k:
        raise ValueError("inner must be a curve in the parameter space of outer")
    lo, hi = float(window[0]), float(window[1])
    cuts = {lo, hi}
    for f in inner.phis + inner.psis:
        cuts.update(_pl_breakpoints(f, np.zeros(1), np.ones(1), lo, hi))
    base_cuts = sorted(cuts)
    for s0, s1 in zip(base_cuts[:-1], base_cuts[1:]):
        z0 = inner.evaluate([s0])
        dz = (inner.evaluate([s1]) - z0) / (s1 - s0)
        for f in outer.phis + outer.psis:
            cuts.update(s0 + t for t in _pl_breakpoints(f, z0, dz, 0.0, s1 - s0))
    ss = np.unique(np.array(sorted(cuts)))
    values = np.array([outer.evaluate(inner.evaluate([s])) for s in ss])
    param_pos = outer.permutation[inner.permutation[0]]
    rest = [p for p in range(outer.d) if p != param_pos]
    phis, psis = [], []
    for p in rest:
        up, down = _pl_to_dc(ss, values[:, p])
        phis.append(up)
        psis.append(down)
    return DCParametrization(1, (param_pos, *rest), tuple(phis), tuple(psis))


# --- JSON ------------------------------------------------------------------------


def oracle_from_dict(desc: dict) -> ConvexOracle:
    kind = desc.get("type")
    if kind == "max_affine":
        return MaxAffine.from_planes(desc["planes"])
    if kind == "quadratic":
        return Quadratic(desc["Q"], desc.get("q"), desc.get("c", 0.0))
    if kind == "sum":
        return Sum([oracle_from_dict(t) for t in desc["terms"]])
    raise ValueError(f"unknown piece type {kind!r}")


def chart_from_dict(desc: dict) -> DCParametrization:
    """Chart from ``{k, permutation, pieces}``; pieces alternate ``phi_j, psi_j``."""
    extra = set(desc) - {"k", "permutation", "pieces"}
    if extra:
        raise ValueError(f"unknown chart keys: {sorted(extra)}")
    pieces = [oracle_from_dict(p) for p in desc["pieces"]]
    if len(pieces) % 2:
        raise ValueError("pieces must come in (phi, psi) pairs")
    return DCParametrization(int(desc["k"]), tuple(desc["permutation"]),
                             tuple(pieces[0::2]), tuple(pieces[1::2]))
