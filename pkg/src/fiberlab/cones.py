"""Cones of centred fields described by a subspace per base point."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .fiber_geometry import bundle_distance, w_mu_sq
from .fields import FiberMeasure, MeasureField, barycenter, gamma_of, midpoint_double, superpose
from .measures import DiscreteMeasure


def orthonormal_rows(vectors: np.ndarray, d: int, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as rows) of the span of the given row vectors."""
    vectors = np.asarray(vectors, dtype=np.float64).reshape(-1, d)
    if vectors.shape[0] == 0:
        return np.zeros((0, d))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, d))
    rank = int(np.sum(s > rel_tol * s[0]))
    return vt[:rank]


def max_principal_angle(U: np.ndarray, V: np.ndarray) -> float:
    """Largest principal angle between row-spans; ``pi/2`` if dimensions differ."""
    if U.shape[0] != V.shape[0]:
        return math.pi / 2
    if U.shape[0] == 0:
        return 0.0
    return float(np.max(subspace_angles(U.T, V.T)))


@dataclass(frozen=True, eq=False)
class GrassmannSection:
    """Orthonormal basis rows of a subspace ``D(x)`` at every base point."""

    base: DiscreteMeasure
    bases: tuple

    def __post_init__(self):
        d = self.base.dim
        bases = tuple(np.asarray(b, dtype=np.float64).reshape(-1, d) for b in self.bases)
        if len(bases) != self.base.size:
            raise ValueError("one subspace per base point is required")
        for b in bases:
            if b.shape[0] > d or np.max(np.abs(b @ b.T - np.eye(b.shape[0])), initial=0.0) > 1e-10:
                raise ValueError("subspace bases must be orthonormal")
            b.setflags(write=False)
        object.__setattr__(self, "bases", bases)

    @classmethod
    def constant(cls, base: DiscreteMeasure, vectors) -> "GrassmannSection":
        U = orthonormal_rows(np.asarray(vectors, float).reshape(-1, base.dim), base.dim)
        return cls(base, tuple(U for _ in range(base.size)))

    @classmethod
    def from_function(cls, base: DiscreteMeasure, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(base, tuple(orthonormal_rows(fn(x), base.dim) for x in base.points))

    def dims(self) -> np.ndarray:
        return np.array([b.shape[0] for b in self.bases])

    def projectors(self) -> list[np.ndarray]:
        return [b.T @ b for b in self.bases]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.base.dim
        w.writerow([f"x{k}" for k in range(d)] + ["dim", "basis"])
        for x, b in zip(self.base.points, self.bases):
            w.writerow([f"{c:.17g}" for c in x] + [b.shape[0], " ".join(f"{c:.17g}" for c in b.ravel())])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "bases": [b.tolist() for b in self.bases]}


def section_from_dict(desc: dict) -> GrassmannSection:
    from .measures import from_descriptor

    extra = set(desc) - {"base", "bases"}
    if extra:
        raise ValueError(f"unknown section keys: {sorted(extra)}")
    base = from_descriptor(desc["base"])
    return GrassmannSection(base, tuple(np.asarray(b, float).reshape(-1, base.dim) for b in desc["bases"]))


def orthogonal_section(D: GrassmannSection) -> GrassmannSection:
    d = D.base.dim
    comp = []
    for b in D.bases:
        if b.shape[0] == 0:
            comp.append(np.eye(d))
        elif b.shape[0] == d:
            comp.append(np.zeros((0, d)))
        else:
            comp.append(null_space(b).T)
    return GrassmannSection(D.base, tuple(comp))


@dataclass(frozen=True)
class ConeMembershipReport:
    centred_defect: float
    graph_mass_defect: float
    verdict: bool


def graph_defect(xi: MeasureField, D: GrassmannSection) -> float:
    """Weighted mean squared distance of atom velocities to ``D(x)``."""
    if not xi.base.same_as(D.base):
        raise ValueError("field and section live on different bases")
    d = xi.dim
    parts = []
    for w, f, b in zip(xi.base.weights, xi.fibers, D.bases):
        if b.shape[0] == d:
            resid = np.zeros_like(f.velocities)
        else:
            resid = f.velocities - (f.velocities @ b.T) @ b
        parts.append(w * math.fsum(f.probs * np.einsum("ij,ij->i", resid, resid)))
    return math.fsum(parts)


def membership(xi: MeasureField, D: GrassmannSection, tol_centred: float = 1e-9,
               tol_graph: float = 1e-9) -> ConeMembershipReport:
    centred = float(np.max(np.linalg.norm(barycenter(xi), axis=1)))
    graph = graph_defect(xi, D)
    return ConeMembershipReport(centred, graph, centred <= tol_centred and graph <= tol_graph)


def project_onto_section_cone(xi: MeasureField, D: GrassmannSection) -> tuple[MeasureField, MeasureField]:
    """Metric projection of a centred field onto the cone of fields living on ``D``.

    Each atom ``v`` goes to ``P v``; the residual field carries ``v - P v``.

    Raises
    ------
    ValueError
        If ``xi`` is not centred or the bases differ.
    """
    if not xi.base.same_as(D.base):
        raise ValueError("field and section live on different bases")
    if np.max(np.abs(barycenter(xi))) > 1e-9:
        raise ValueError("field is not centred")
    proj, resid = [], []
    for f, P in zip(xi.fibers, D.projectors()):
        pv = f.velocities @ P
        proj.append(FiberMeasure.build(pv, f.probs))
        resid.append(FiberMeasure.build(f.velocities - pv, f.probs))
    return MeasureField(xi.base, tuple(proj)), MeasureField(xi.base, tuple(resid))


def _gap_to_map(zeta: MeasureField, f: np.ndarray) -> float:
    """Squared fiberwise distance from ``zeta`` to the deterministic field ``(id, f)``."""
    return math.fsum(
        w * math.fsum(fib.probs * np.sum((fib.velocities - fx) ** 2, axis=1))
        for w, fib, fx in zip(zeta.base.weights, zeta.fibers, f)
    )


@dataclass(frozen=True)
class DoublingTrace:
    gaps_plus: tuple
    gaps_minus: tuple
    superposition_gap_sq: tuple

    def ratios(self) -> np.ndarray:
        g = np.asarray(self.gaps_plus)
        with np.errstate(divide="ignore", invalid="ignore"):
            return g[1:] / g[:-1]


def doubling_limit(zeta_plus: MeasureField, zeta_minus: MeasureField, iters: int,
                   cap: int = 4096) -> tuple[np.ndarray, DoublingTrace]:
    """Iterate the midpoint doubling on both legs.

    Returns the barycenter ``f_plus`` of the first leg and the trace of
    squared gaps to ``(id, f_plus)`` and ``(id, -f_plus)``, together with the
    squared distance of the symmetric superposition to ``gamma_of(f_plus)``.
    """
    f_plus = barycenter(zeta_plus)
    f_minus = barycenter(zeta_minus)
    if np.max(np.abs(f_plus + f_minus)) > 1e-9:
        raise ValueError("the half-sum of the two legs must be centred")
    target = gamma_of(f_plus, zeta_plus.base)
    gp, gm, sd = [], [], []
    zp, zm = zeta_plus, zeta_minus
    for k in range(iters + 1):
        gp.append(_gap_to_map(zp, f_plus))
        gm.append(_gap_to_map(zm, -f_plus))
        sd.append(w_mu_sq(superpose([(0.5, zp), (0.5, zm)]), target))
        if k < iters:
            zp = midpoint_double(zp, cap)
            zm = midpoint_double(zm, cap)
    return f_plus, DoublingTrace(tuple(gp), tuple(gm), tuple(sd))


def estimate_section(fields: Sequence[MeasureField], svd_tol: float = 1e-6,
                     abs_floor: float = 1e-9) -> GrassmannSection:
    """Span of all observed atom velocities per base point.

    Singular values below ``svd_tol`` times the largest, or below
    ``abs_floor``, are treated as zero.
    """
    if not fields:
        raise ValueError("no fields given")
    base = fields[0].base
    if any(not f.base.same_as(base) for f in fields[1:]):
        raise ValueError("fields live on different bases")
    d = base.dim
    out = []
    for i in range(base.size):
        rows = np.vstack([f.fibers[i].velocities for f in fields])
        _, s, vt = np.linalg.svd(rows, full_matrices=False)
        if s.size == 0 or s[0] <= abs_floor:
            out.append(np.zeros((0, d)))
            continue
        rank = int(np.sum((s > svd_tol * s[0]) & (s > abs_floor)))
        out.append(vt[:rank])
    return GrassmannSection(base, tuple(out))


SectionRule = Callable[[DiscreteMeasure], GrassmannSection]


@dataclass(frozen=True)
class ClosednessReport:
    gaps: tuple
    defects: tuple
    limit_defect: float
    passed: bool
    limit_centred_defect: float
    limit_complement_defect: float
    label: str = field(default="")


def closedness_regression(sequence: Sequence[MeasureField], section, tol: float = 1e-8,
                          centred_tol: float = 1e-9) -> ClosednessReport:
    """Track graph defects along a convergent sequence of fields.

    ``section`` is either a :class:`GrassmannSection` shared by all elements
    or a rule mapping each base to its section. The last element plays the
    limit. The label classifies the limit relative to the section ``D`` and
    its complement: ``"solenoidal-not-tangent"`` means centred, on ``D`` and
    not on ``D``'s complement (taking ``D`` as the solenoidal section).

    Raises
    ------
    ValueError
        If consecutive bundle distances increase.
    """
    if len(sequence) < 2:
        raise ValueError("need at least two elements")

    def sec(xi):
        return section(xi.base) if callable(section) else section

    gaps = [bundle_distance(a, b) for a, b in zip(sequence[:-1], sequence[1:])]
    for g0, g1 in zip(gaps, gaps[1:]):
        if g1 > g0 * (1 + 1e-9) + 1e-12:
            raise ValueError("sequence is not Cauchy: gaps increase")
    defects = [graph_defect(xi, sec(xi)) for xi in sequence[:-1]]
    limit = sequence[-1]
    D = sec(limit)
    limit_defect = graph_defect(limit, D)
    centred = float(np.max(np.linalg.norm(barycenter(limit), axis=1)))
    comp = graph_defect(limit, orthogonal_section(D))
    on_graph = limit_defect <= max(defects) + tol
    if centred <= centred_tol and limit_defect <= tol and comp > tol:
        label = "solenoidal-not-tangent"
    elif centred <= centred_tol and comp <= tol and limit_defect > tol:
        label = "tangent-not-solenoidal"
    elif centred <= centred_tol and comp <= tol and limit_defect <= tol:
        label = "both"
    else:
        label = "neither"
    return ClosednessReport(tuple(gaps), tuple(defects), limit_defect, on_graph, centred, comp, label)
