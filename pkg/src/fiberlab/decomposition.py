"""Splitting-dimension decomposition of a discrete measure and related checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cones import GrassmannSection, estimate_section, max_principal_angle, orthogonal_section
from .dc_geometry import DCParametrization, tangent_plane
from .fiber_geometry import w_mu_sq
from .fields import FiberMeasure, MeasureField, center, velocity_of_plan
from .measures import DiscreteMeasure, MeasureMixture, _mask, make_measure, restrict
from .ot_core import solve_ot


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """``mu = sum_k masses[k] * components[k]`` with ``k = dim D(x)``."""

    base: DiscreteMeasure
    masses: np.ndarray
    components: dict
    sections: dict
    classification: np.ndarray

    def remix(self) -> DiscreteMeasure:
        from .measures import mix

        return mix([(self.masses[k], c) for k, c in self.components.items()])

    def to_csv(self, section: GrassmannSection | None = None) -> str:
        """Classification table; with ``section`` also its basis per point."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.base.dim
        header = [f"x{j}" for j in range(d)] + ["k"]
        if section is not None:
            header.append("basis")
        w.writerow(header)
        for i, (x, k) in enumerate(zip(self.base.points, self.classification)):
            row = [f"{c:.17g}" for c in x] + [int(k)]
            if section is not None:
                row.append(" ".join(f"{c:.17g}" for c in section.bases[i].ravel()))
            w.writerow(row)
        return buf.getvalue()


def decompose(mu: DiscreteMeasure, D: GrassmannSection, kind: str = "sol") -> DecompositionResult:
    """Group base points by ``k = dim D(x)``.

    ``kind="sol"`` takes ``D`` as the solenoidal section. With ``kind="tan"``
    the section of splitting directions is given instead, and its orthogonal
    complement is used, so ``D = {0}`` puts everything in bucket ``d``.
    """
    if not D.base.same_as(mu):
        raise ValueError("section lives on a different base")
    if kind not in ("sol", "tan"):
        raise ValueError("kind must be 'sol' or 'tan'")
    sol = D if kind == "sol" else orthogonal_section(D)
    dims = sol.dims()
    masses = np.array([math.fsum(mu.weights[dims == k]) for k in range(mu.dim + 1)])
    components, sections = {}, {}
    for k in range(mu.dim + 1):
        mask = dims == k
        if not mask.any():
            continue
        comp, _ = restrict(mu, mask)
        components[k] = comp
        sections[k] = GrassmannSection(comp, tuple(b for b, m in zip(sol.bases, mask) if m))
    return DecompositionResult(mu, masses, components, sections, dims.copy())


def estimate_dtan(mu: DiscreteMeasure, targets: Sequence[DiscreteMeasure], svd_tol: float = 1e-6,
                  abs_floor: float = 1e-9) -> GrassmannSection:
    """Span of the centred velocities of optimal plans from ``mu`` to each target."""
    if not targets:
        raise ValueError("no targets given")
    fields = []
    for nu in targets:
        if nu.dim != mu.dim:
            raise ValueError("targets must have the dimension of mu")
        plan, _ = solve_ot(mu, nu)
        fields.append(center(velocity_of_plan(plan)))
    return estimate_section(fields, svd_tol=svd_tol, abs_floor=abs_floor)


# --- max-min identification -------------------------------------------------------


@dataclass(frozen=True)
class MaxMinResult:
    maxmin: float
    minmax: float

    @property
    def reversible(self) -> bool:
        return self.maxmin == self.minmax


def maxmin_component_mass(mu, A, B_candidates: Sequence, C_candidates: Sequence) -> MaxMinResult:
    """``max_B min_C mu(A & B - C)`` together with ``min_C max_B`` of the same.

    Sets are boolean masks or vectorized predicates on the support of ``mu``
    (a measure or a labeled mixture).
    """
    if not B_candidates or not C_candidates:
        raise ValueError("candidate lists must be nonempty")
    m = mu.measure if isinstance(mu, MeasureMixture) else mu
    a = _mask(m, A)
    Bs = [_mask(m, b) for b in B_candidates]
    Cs = [_mask(m, c) for c in C_candidates]
    table = np.array([[m.mass(a & b & ~c) for c in Cs] for b in Bs])
    return MaxMinResult(float(table.min(axis=1).max()), float(table.max(axis=0).min()))


def cover_candidates(mixture: MeasureMixture, k: int, rng: np.random.Generator | None = None,
                     n_extra: int = 4) -> tuple[list, list]:
    """Candidate covers for the max-min formula.

    ``B`` candidates are subsets of the points labeled ``<= k`` (sets coverable
    by ``k``-dimensional pieces), ``C`` candidates subsets of those labeled
    ``< k``. Both lists contain the full ground-truth set first, followed by
    ``n_extra`` random subsets.
    """
    labels = np.array([int(t) for t in mixture.point_labels])
    low_b = labels <= k
    low_c = labels < k
    B, C = [low_b], [low_c]
    if rng is not None:
        for _ in range(n_extra):
            B.append(low_b & (rng.random(labels.size) < 0.5))
            C.append(low_c & (rng.random(labels.size) < 0.5))
    return B, C


# --- concentration bound ----------------------------------------------------------


def frame_field(D: GrassmannSection) -> MeasureField:
    """Field with fiber uniform on ``{+f_j(x), -f_j(x)}`` for the basis ``f_j`` of ``D(x)``."""
    dims = D.dims()
    if dims.size == 0 or np.any(dims != dims[0]) or dims[0] == 0:
        raise ValueError("section must have constant positive dimension")
    fibers = tuple(FiberMeasure.build(np.vstack([b, -b])) for b in D.bases)
    return MeasureField(D.base, fibers)


def chebyshev_bound_check(eta: MeasureField, D: GrassmannSection, xi: MeasureField | None = None,
                          radius: float = 0.5, mass_threshold: float | None = None) -> tuple[float, float]:
    """Mass of points where some ball ``B(+-f_j(x), radius)`` is light for ``eta``.

    Returns ``(lhs, rhs)`` with ``rhs = 16 (d - k) w_mu(eta, xi)^2``; ``xi``
    defaults to :func:`frame_field` of ``D`` and ``d - k = dim D``.
    """
    if xi is None:
        xi = frame_field(D)
    m = int(D.dims()[0])
    if np.any(D.dims() != m):
        raise ValueError("section must have constant dimension")
    thr = 1.0 / (4 * m) if mass_threshold is None else mass_threshold
    light = np.zeros(eta.base.size, dtype=bool)
    for i, (fib, b) in enumerate(zip(eta.fibers, D.bases)):
        for c in np.vstack([b, -b]):
            inside = np.linalg.norm(fib.velocities - c, axis=1) <= radius
            if math.fsum(fib.probs[inside]) <= thr:
                light[i] = True
                break
    lhs = eta.base.mass(light)
    rhs = 16 * m * w_mu_sq(eta, xi)
    return lhs, rhs


# --- tangent planes against the solenoidal section --------------------------------


@dataclass(frozen=True)
class TangentAlignmentReport:
    defects: np.ndarray
    exceptional: np.ndarray
    exceptional_mass: float
    threshold: float
    max_defect: float
    passed: bool

    def to_csv(self, base: DiscreteMeasure) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(base.dim)] + ["angle_defect"])
        for x, a in zip(base.points, self.defects):
            w.writerow([f"{c:.17g}" for c in x] + [f"{a:.17g}"])
        return buf.getvalue()


def verify_tangent_alignment(mu: DiscreteMeasure, charts: Sequence[DCParametrization], D_sol: GrassmannSection,
                angle_tol: float = 1e-6, threshold: float | None = None) -> TangentAlignmentReport:
    """Angles between chart tangent planes and ``D_sol`` at every base point.

    Points not on any chart or without a common tangent plane are
    exceptional; their total mass must stay below ``threshold`` (``2/n``).
    """
    thr = 2.0 / mu.size if threshold is None else threshold
    defects = np.full(mu.size, np.nan)
    exceptional = np.zeros(mu.size, dtype=bool)
    for i, x in enumerate(mu.points):
        on = [c for c in charts if c.contains(x)]
        rep = tangent_plane(on, x) if on else None
        if rep is None or not rep.exists:
            exceptional[i] = True
            continue
        defects[i] = max_principal_angle(rep.plane, D_sol.bases[i])
    exc_mass = mu.mass(exceptional)
    worst = float(np.nanmax(defects)) if np.any(~exceptional) else 0.0
    return TangentAlignmentReport(defects, exceptional, exc_mass, thr, worst, worst <= angle_tol and exc_mass <= thr)


# --- blow-ups ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlowUpResult:
    """Rescaled, renormalized restrictions of ``mu`` around ``center``."""

    center: np.ndarray
    scales: np.ndarray
    measures: tuple
    ball_masses: np.ndarray
    window_R: float

    def ratios(self, k: float) -> np.ndarray:
        """Raw density ratios ``mu(B(x, R h)) / h^k``."""
        return self.ball_masses / self.scales**k

    def concentration(self, P, eps: float, R: float | None = None) -> np.ndarray:
        R = self.window_R if R is None else R
        return np.array([tube_mass(nu, P, eps, R) for nu in self.measures])

    def curve_csv(self, P, eps: float) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "tube_mass"])
        for h, t in zip(self.scales, self.concentration(P, eps)):
            w.writerow([f"{h:.17g}", f"{t:.17g}"])
        return buf.getvalue()


def blowup_sequence(mu: DiscreteMeasure, x, h_list, window_R: float = 1.0,
                  support_tol: float = 1e-9) -> BlowUpResult:
    """Blow-ups ``(y - x)/h`` restricted to ``B(0, window_R)`` and normalized.

    Raises
    ------
    ValueError
        If ``x`` is not a support point, the scales are not decreasing, or a
        window carries no mass.
    """
    x = np.asarray(x, float)
    h = np.asarray(h_list, float)
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("scales must be positive and decreasing")
    dist = np.linalg.norm(mu.points - x, axis=1)
    if dist.min() > support_tol:
        raise ValueError("center is not a support point")
    measures, masses = [], []
    for hn in h:
        inside = dist <= window_R * hn
        mass = mu.mass(inside)
        if mass <= 0:
            raise ValueError("window carries no mass")
        measures.append(make_measure((mu.points[inside] - x) / hn, mu.weights[inside] / mass))
        masses.append(mass)
    return BlowUpResult(x, h, tuple(measures), np.array(masses), float(window_R))


def tube_mass(nu: DiscreteMeasure, P, eps: float, R: float = 1.0) -> float:
    """Mass of ``B(0, R)`` outside the ``eps``-neighbourhood of the plane ``P``."""
    if not eps < R:
        raise ValueError("need eps < R")
    P = np.asarray(P, float).reshape(-1, nu.dim)
    y = nu.points
    resid = y - (y @ P.T) @ P if P.shape[0] else y
    out = (np.linalg.norm(y, axis=1) <= R) & (np.linalg.norm(resid, axis=1) > eps)
    return nu.mass(out)
