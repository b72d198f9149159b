"""Constructed measures, fields and target families with known answers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cones import GrassmannSection
from .dc_geometry import DCParametrization, MaxAffine, Quadratic, graph_chart
from .fields import FiberMeasure, MeasureField, map_field
from .measures import DiscreteMeasure, MeasureMixture, ac_grid, atoms, make_measure, mix, sample_dc_curve


def _zero(k: int = 1) -> MaxAffine:
    return MaxAffine(np.zeros((1, k)), [0.0])


# --- curves ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurveFixture:
    mu: DiscreteMeasure
    chart: DCParametrization
    window: tuple

    def tangents(self) -> np.ndarray:
        """Unit tangent of the chart at each support point."""
        out = []
        for x in self.mu.points:
            J = self.chart.jacobian(self.chart.preimage(x))
            if isinstance(J, str):
                out.append(np.full(self.mu.dim, np.nan))
            else:
                out.append(J[:, 0] / np.linalg.norm(J[:, 0]))
        return np.array(out)

    def tangent_section(self) -> GrassmannSection:
        """Tangent lines as a section; kink points get the zero space."""
        bases = [t[None, :] if np.all(np.isfinite(t)) else np.zeros((0, self.mu.dim)) for t in self.tangents()]
        return GrassmannSection(self.mu, tuple(bases))


def segment(n: int = 200) -> CurveFixture:
    """``n`` midpoint samples of ``[0, 1] x {0}``."""
    chart = graph_chart(1, [_zero()])
    return CurveFixture(sample_dc_curve(chart, n, ([0.0], [1.0])), chart, (0.0, 1.0))


def parabola(n: int = 4010, window=(-1.0, 1.0)) -> CurveFixture:
    """Samples of ``t -> (t, t^2)``; with ``n = 4010`` on ``[-1, 1]`` one sample sits at ``t = 0.3``."""
    chart = graph_chart(1, [Quadratic([[2.0]])])
    return CurveFixture(sample_dc_curve(chart, n, ([window[0]], [window[1]])), chart, tuple(window))


def absolute_value(n: int = 201) -> CurveFixture:
    """Samples of ``t -> (t, |t|)`` on ``[-1, 1]``; odd ``n`` puts one sample on the kink."""
    chart = graph_chart(1, [MaxAffine([[1.0], [-1.0]], [0.0, 0.0])])
    return CurveFixture(sample_dc_curve(chart, n, ([-1.0], [1.0])), chart, (-1.0, 1.0))


def split_target(mu: DiscreteMeasure, directions: np.ndarray, eps: float) -> DiscreteMeasure:
    """Each point ``x`` sends half its mass to ``x + eps u(x)`` and half to ``x - eps u(x)``."""
    u = np.asarray(directions, float).reshape(mu.size, mu.dim)
    pts = np.vstack([mu.points + eps * u, mu.points - eps * u])
    return make_measure(pts, np.concatenate([mu.weights, mu.weights]) / 2)


def vertical_split_family(mu: DiscreteMeasure, eps: float = 1e-2) -> list[DiscreteMeasure]:
    """``1/2 (mu + eps e_2) + 1/2 (mu - eps e_2)``."""
    e2 = np.zeros(mu.dim)
    e2[1] = 1.0
    return [split_target(mu, np.tile(e2, (mu.size, 1)), eps)]


# --- three-part mixture -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecompositionFixture:
    mixture: MeasureMixture
    curve: CurveFixture
    targets: tuple
    eps: float

    @property
    def mu(self) -> DiscreteMeasure:
        return self.mixture.measure

    def labels(self) -> np.ndarray:
        return np.array([int(t) for t in self.mixture.point_labels])

    def curve_tangents(self) -> np.ndarray:
        """Analytic unit tangents at the curve points of the mixture (NaN elsewhere)."""
        out = np.full((self.mu.size, 2), np.nan)
        for i, (x, lab) in enumerate(zip(self.mu.points, self.labels())):
            if lab == 1:
                J = self.curve.chart.jacobian(self.curve.chart.preimage(x))
                out[i] = J[:, 0] / np.linalg.norm(J[:, 0])
        return out


GRID_MAP = np.array([[1.0, 0.3], [0.3, 0.5]])


def decomposition_mixture(n_curve: int = 100, grid: tuple = (10, 10), eps: float = 1e-3) -> DecompositionFixture:
    """Two atoms, a curve and a grid, one third of the mass each.

    The target family has two members. Atoms split along ``e_1`` in the first
    and ``e_2`` in the second, curve points split along the curve normal in
    both, and grid points move by the gradient map ``x -> x + eps A x``. With
    ``eps`` below half the minimal spacing these plans are the unique optimal
    ones.
    """
    pts_atoms = atoms([[-1.5, 0.25], [-1.5, 0.75]])
    chart = graph_chart(1, [Quadratic([[1.6]], [0.0], 0.5)])
    curve = CurveFixture(sample_dc_curve(chart, n_curve, ([-0.5], [0.5])), chart, (-0.5, 0.5))
    square = ac_grid([1.0, 0.0], [2.0, 1.0], grid)
    third = 1.0 / 3.0
    mixture = MeasureMixture((third, third, third), (pts_atoms, curve.mu, square), (0, 1, 2))
    mu = mixture.measure
    labels = np.array([int(t) for t in mixture.point_labels])
    normals = np.zeros((mu.size, 2))
    for i, x in enumerate(mu.points):
        if labels[i] == 1:
            n = np.array([-1.6 * x[0], 1.0])
            normals[i] = n / np.linalg.norm(n)
    targets = []
    for axis in range(2):
        dirs = normals.copy()
        dirs[labels == 0] = np.eye(2)[axis]
        split = labels <= 1
        moved = mu.points[~split] + eps * mu.points[~split] @ GRID_MAP
        pts = np.vstack([mu.points[split] + eps * dirs[split], mu.points[split] - eps * dirs[split], moved])
        w = np.concatenate([mu.weights[split] / 2, mu.weights[split] / 2, mu.weights[~split]])
        targets.append(make_measure(pts, w))
    return DecompositionFixture(mixture, curve, tuple(targets), eps)


# --- square boundary ----------------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """``height * exp(-1 / (1 - |x - c|^2 / r^2))`` inside the ball, zero outside."""

    center: tuple
    radius: float
    height: float = 1.0

    def _s(self, x):
        x = np.atleast_2d(x)
        diff = x - np.asarray(self.center)
        return diff, np.einsum("ij,ij->i", diff, diff) / self.radius**2

    def value(self, x) -> np.ndarray:
        _, s = self._s(x)
        out = np.zeros(s.shape)
        inside = s < 1
        out[inside] = self.height * np.exp(-1.0 / (1.0 - s[inside]))
        return out

    def grad(self, x) -> np.ndarray:
        diff, s = self._s(x)
        out = np.zeros(diff.shape)
        inside = s < 1
        phi = self.height * np.exp(-1.0 / (1.0 - s[inside]))
        coef = -phi / (1.0 - s[inside]) ** 2 * 2.0 / self.radius**2
        out[inside] = coef[:, None] * diff[inside]
        return out


def standard_bumps(count: int = 10, seed: int = 20240611) -> list[Bump]:
    """Fixed bumps whose supports meet the boundary of the unit square."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(-0.25, 1.25, size=2)
        out.append(Bump((float(c[0]), float(c[1])), float(rng.uniform(0.6, 1.0)), float(rng.uniform(0.5, 2.0))))
    return out


# clockwise: top left->right, right top->bottom, bottom right->left, left bottom->top
SQUARE_SIDES = (
    (np.array([0.0, 1.0]), np.array([1.0, 0.0])),
    (np.array([1.0, 1.0]), np.array([0.0, -1.0])),
    (np.array([1.0, 0.0]), np.array([-1.0, 0.0])),
    (np.array([0.0, 0.0]), np.array([0.0, 1.0])),
)


def square_boundary(n: int) -> tuple[DiscreteMeasure, MeasureField]:
    """Uniform measure on ``n`` midpoints per side of the unit square and its unit tangent field."""
    s = (np.arange(n) + 0.5) / n
    pts = np.vstack([start + s[:, None] * d for start, d in SQUARE_SIDES])
    tang = np.vstack([np.tile(d, (n, 1)) for _, d in SQUARE_SIDES])
    mu = make_measure(pts)
    lookup = {tuple(p): t for p, t in zip(pts, tang)}
    zeta = map_field(mu, np.array([lookup[tuple(p)] for p in mu.points]))
    return mu, zeta


# --- sequences for closedness -----------------------------------------------------


def weak_escape_sequence(levels=(4, 8, 16, 32, 64)) -> list[MeasureField]:
    """Maps ``+-1`` alternating on ``2n`` midpoints of ``[0, 1]``, then their limit.

    The last element is the centred field with fiber ``(delta_-1 + delta_1)/2``
    on the finest base.
    """
    seq = []
    for n in levels:
        pts = ((np.arange(2 * n) + 0.5) / (2 * n))[:, None]
        signs = np.where(np.arange(2 * n) % 2 == 0, 1.0, -1.0)[:, None]
        mu = make_measure(pts)
        seq.append(map_field(mu, signs))
    mu = seq[-1].base
    seq.append(MeasureField(mu, tuple(FiberMeasure.build([[-1.0], [1.0]]) for _ in range(mu.size))))
    return seq


def converging_gamma_sequence(mu: DiscreteMeasure, direction, steps: int = 6) -> list[MeasureField]:
    """``gamma_{(1 + 2^-j) u}`` for ``j < steps`` followed by ``gamma_u``."""
    from .fields import gamma_of

    u = np.asarray(direction, float)
    seq = [gamma_of(np.tile((1 + 2.0**-j) * u, (mu.size, 1)), mu) for j in range(steps)]
    seq.append(gamma_of(np.tile(u, (mu.size, 1)), mu))
    return seq


# --- random fields ------------------------------------------------------------------


def random_measure(rng: np.random.Generator, n: int, d: int, denom: int | None = None) -> DiscreteMeasure:
    """Random support in ``[-1, 1]^d``; with ``denom`` integer-valued weights over ``denom``."""
    pts = rng.uniform(-1, 1, size=(n, d))
    if denom is None:
        w = rng.uniform(0.2, 1.0, size=n)
    else:
        w = _integer_split(rng, denom, n).astype(float)
    return make_measure(pts, w)


def _integer_split(rng, total: int, parts: int) -> np.ndarray:
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else []
    return np.diff(np.concatenate([[0], cuts, [total]])).astype(int)


def random_fiber(rng: np.random.Generator, d: int, max_atoms: int, centred: bool = False) -> FiberMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    if centred and k == 1:
        return FiberMeasure.single(np.zeros(d))
    v = rng.normal(size=(k, d))
    p = rng.uniform(0.2, 1.0, size=k)
    p = p / math.fsum(p)
    if centred:
        v = v - p @ v
    return FiberMeasure.build(v, p)


def random_field(rng: np.random.Generator, mu: DiscreteMeasure, max_atoms: int = 4,
                 centred: bool = False) -> MeasureField:
    from .fields import center

    xi = MeasureField(mu, tuple(random_fiber(rng, mu.dim, max_atoms) for _ in range(mu.size)))
    return center(xi) if centred else xi


def random_perp_field(rng: np.random.Generator, mu: DiscreteMeasure, f: np.ndarray,
                      max_atoms: int = 4) -> MeasureField:
    """Centred field whose atoms are orthogonal to ``f(x)`` (symmetric pairs in the complement)."""
    fibers = []
    for fx in f:
        n = np.linalg.norm(fx)
        basis = np.eye(mu.dim) if n == 0 else _complement(fx / n)
        k = int(rng.integers(1, max_atoms // 2 + 1))
        coef = rng.normal(size=(k, basis.shape[0]))
        v = coef @ basis if basis.shape[0] else np.zeros((k, mu.dim))
        fibers.append(FiberMeasure.build(np.vstack([v, -v])))
    return MeasureField(mu, tuple(fibers))


def _complement(u: np.ndarray) -> np.ndarray:
    from scipy.linalg import null_space

    return null_space(u[None, :]).T


def random_two_atom_field(rng: np.random.Generator, mu: DiscreteMeasure) -> MeasureField:
    fibers = []
    for _ in range(mu.size):
        v = rng.normal(size=(2, mu.dim))
        p = rng.uniform(0.2, 0.8)
        fibers.append(FiberMeasure.build(v, [p, 1 - p]))
    return MeasureField(mu, tuple(fibers))


def atoms_and_line() -> MeasureMixture:
    """Atoms and a diffuse grid on the line, labeled 0 and 1."""
    pts = atoms([[-2.0], [-1.5]])
    line = make_measure(((np.arange(20) + 0.5) / 20)[:, None])
    return MeasureMixture((0.25, 0.75), (pts, line), (0, 1))
