"""Measure fields: per-point velocity distributions over a discrete base."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measures import DiscreteMeasure, _mask, grid_keys, merge_rows, mix, normalize_weights, restrict
from .ot_core import TransportPlan


@dataclass(frozen=True, eq=False)
class FiberMeasure:
    """Probability vector on distinct velocities, canonically sorted."""

    velocities: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        if v.ndim != 2 or p.shape != (v.shape[0],):
            raise ValueError("velocities must be (k, d) with one prob each")
        if v.shape[0] == 0 or np.any(p <= 0) or abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError("fiber probabilities must be positive and sum to 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite velocity")
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def build(cls, velocities, probs=None) -> "FiberMeasure":
        """Canonical fiber: merge grid-equal velocities and sort them."""
        v = np.asarray(velocities, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        p = np.full(v.shape[0], 1.0 / v.shape[0]) if probs is None else np.asarray(probs, float)
        if np.any(p < 0):
            raise ValueError("negative fiber probability")
        v, p = merge_rows(v, p)
        return cls(v, normalize_weights(p))

    @classmethod
    def single(cls, v) -> "FiberMeasure":
        return cls(np.asarray(v, dtype=np.float64).reshape(1, -1), np.ones(1))

    @property
    def size(self) -> int:
        return self.velocities.shape[0]

    def mean(self) -> np.ndarray:
        return self.probs @ self.velocities

    def second_moment(self) -> float:
        return math.fsum(self.probs * np.einsum("ij,ij->i", self.velocities, self.velocities))

    def same_as(self, other: "FiberMeasure") -> bool:
        return np.array_equal(self.velocities, other.velocities) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class MeasureField:
    """A base measure with one fiber per base point.

    The global weight of atom ``(x_i, v_ij)`` is ``mu_i * p_ij``.
    """

    base: DiscreteMeasure
    fibers: tuple

    def __post_init__(self):
        fibers = tuple(self.fibers)
        if len(fibers) != self.base.size:
            raise ValueError("one fiber per base point is required")
        if any(f.velocities.shape[1] != self.base.dim for f in fibers):
            raise ValueError("fiber dimension differs from base dimension")
        object.__setattr__(self, "fibers", fibers)

    @property
    def dim(self) -> int:
        return self.base.dim

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(x, v)`` atoms in base-then-fiber order."""
        X = np.repeat(self.base.points, [f.size for f in self.fibers], axis=0)
        V = np.vstack([f.velocities for f in self.fibers])
        return X, V

    def atom_weights(self) -> np.ndarray:
        return np.concatenate([w * f.probs for w, f in zip(self.base.weights, self.fibers)])

    def norm_sq(self) -> float:
        return math.fsum(w * f.second_moment() for w, f in zip(self.base.weights, self.fibers))

    def same_as(self, other: "MeasureField") -> bool:
        return self.base.same_as(other.base) and all(
            a.same_as(b) for a, b in zip(self.fibers, other.fibers)
        )

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "fibers": [
                {"velocities": f.velocities.tolist(), "probs": f.probs.tolist()} for f in self.fibers
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.dim
        w.writerow([f"x{k}" for k in range(d)] + [f"v{k}" for k in range(d)] + ["weight"])
        X, V = self.pairs()
        for x, v, m in zip(X, V, self.atom_weights()):
            w.writerow([f"{c:.17g}" for c in x] + [f"{c:.17g}" for c in v] + [f"{m:.17g}"])
        return buf.getvalue()


def field_from_dict(desc: dict) -> MeasureField:
    from .measures import from_descriptor

    extra = set(desc) - {"base", "fibers"}
    if extra:
        raise ValueError(f"unknown field keys: {sorted(extra)}")
    base = from_descriptor(desc["base"])
    fibers = desc["fibers"]
    if len(fibers) != base.size:
        raise ValueError("one fiber per base point is required")
    return MeasureField(
        base, tuple(FiberMeasure.build(f["velocities"], f.get("probs")) for f in fibers)
    )


def map_field(mu: DiscreteMeasure, f) -> MeasureField:
    """The deterministic field ``(id, f)_# mu``."""
    vals = np.asarray(f(mu.points) if callable(f) else f, dtype=np.float64).reshape(mu.size, -1)
    return MeasureField(mu, tuple(FiberMeasure.single(v) for v in vals))


def zero_field(mu: DiscreteMeasure) -> MeasureField:
    return map_field(mu, np.zeros((mu.size, mu.dim)))


def barycenter(xi: MeasureField) -> np.ndarray:
    """Mean velocity per base point, shape ``(n, d)``."""
    return np.array([f.mean() for f in xi.fibers])


def _map_fibers(xi: MeasureField, fn) -> MeasureField:
    return MeasureField(
        xi.base, tuple(FiberMeasure.build(fn(i, f.velocities), f.probs) for i, f in enumerate(xi.fibers))
    )


def center(xi: MeasureField) -> MeasureField:
    """Translate each fiber by minus its mean."""
    b = barycenter(xi)
    return _map_fibers(xi, lambda i, v: v - b[i])


def scale(lam: float, xi: MeasureField) -> MeasureField:
    return _map_fibers(xi, lambda i, v: lam * v)


def gamma_of(f, mu: DiscreteMeasure) -> MeasureField:
    """Symmetric field with fiber ``(delta_{-f(x)} + delta_{f(x)})/2``."""
    vals = np.asarray(f(mu.points) if callable(f) else f, dtype=np.float64).reshape(mu.size, -1)
    return MeasureField(
        mu, tuple(FiberMeasure.build(np.vstack([-v, v]), [0.5, 0.5]) for v in vals)
    )


def velocity_of_plan(plan: TransportPlan) -> MeasureField:
    """Fiber at ``x_i`` puts ``mass(i, j) / mu_i`` on ``y_j - x_i``."""
    mu = plan.source
    fibers = []
    starts = np.searchsorted(plan.rows, np.arange(mu.size + 1))
    for i in range(mu.size):
        sl = slice(starts[i], starts[i + 1])
        v = plan.target.points[plan.cols[sl]] - mu.points[i]
        fibers.append(FiberMeasure.build(v, plan.masses[sl] / mu.weights[i]))
    return MeasureField(mu, tuple(fibers))


@dataclass(frozen=True, eq=False)
class FiberCoupling:
    """Per-point couplings between the fibers of two same-base fields.

    ``entries[i]`` is an ``(r, 3)`` array of ``(j, l, mass)`` rows with
    masses summing to one.
    """

    left: MeasureField
    right: MeasureField
    entries: tuple

    def __post_init__(self):
        if not self.left.base.same_as(self.right.base):
            raise ValueError("coupled fields must share a base")
        for e, f, g in zip(self.entries, self.left.fibers, self.right.fibers):
            j = e[:, 0].astype(int)
            l = e[:, 1].astype(int)
            if np.max(np.abs(np.bincount(j, e[:, 2], f.size) - f.probs)) > 1e-10 or \
                    np.max(np.abs(np.bincount(l, e[:, 2], g.size) - g.probs)) > 1e-10:
                raise ValueError("coupling marginals differ from the fibers")

    @property
    def base(self) -> DiscreteMeasure:
        return self.left.base

    def swapped(self) -> "FiberCoupling":
        return FiberCoupling(self.right, self.left, tuple(e[:, [1, 0, 2]] for e in self.entries))


def horizontal_interpolate(alpha: FiberCoupling, lam: float) -> MeasureField:
    """Push each coupled pair ``(v, w)`` to ``(1 - lam) v + lam w``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    fibers = []
    for e, f, g in zip(alpha.entries, alpha.left.fibers, alpha.right.fibers):
        v = f.velocities[e[:, 0].astype(int)]
        w = g.velocities[e[:, 1].astype(int)]
        if lam == 0.0:
            pts = v
        elif lam == 1.0:
            pts = w
        else:
            pts = (1.0 - lam) * v + lam * w
        fibers.append(FiberMeasure.build(pts, e[:, 2]))
    return MeasureField(alpha.base, tuple(fibers))


def pointwise_product_plan(zeta: MeasureField, cap: int = 4096) -> FiberCoupling:
    """Independent product coupling of every fiber with itself."""
    entries = []
    for f in zeta.fibers:
        k = f.size
        if k * k > cap:
            raise ValueError(f"product fiber would carry {k * k} atoms (cap {cap})")
        j, l = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        entries.append(
            np.column_stack([j.ravel(), l.ravel(), np.outer(f.probs, f.probs).ravel()])
        )
    return FiberCoupling(zeta, zeta, tuple(entries))


def midpoint_double(zeta: MeasureField, cap: int = 4096) -> MeasureField:
    """Law of ``(v + w)/2`` for ``v, w`` independent draws from each fiber."""
    return horizontal_interpolate(pointwise_product_plan(zeta, cap), 0.5)


def restrict_field(xi: MeasureField, predicate) -> MeasureField:
    mask = _mask(xi.base, predicate)
    sub, _ = restrict(xi.base, mask)
    return MeasureField(sub, tuple(f for f, keep in zip(xi.fibers, mask) if keep))


def superpose(parts: Sequence[tuple[float, MeasureField]]) -> MeasureField:
    """Mixture ``sum m_k xi_k`` of fields, merging fibers over shared base points."""
    parts = [(float(m), xi) for m, xi in parts if m > 0]
    if not parts:
        raise ValueError("empty superposition")
    base = mix([(m, xi.base) for m, xi in parts])
    lookup = {k.tobytes(): i for i, k in enumerate(grid_keys(base.points))}
    vel: list[list[np.ndarray]] = [[] for _ in range(base.size)]
    mass: list[list[np.ndarray]] = [[] for _ in range(base.size)]
    for m, xi in parts:
        for key, w, f in zip(grid_keys(xi.base.points), xi.base.weights, xi.fibers):
            i = lookup[key.tobytes()]
            vel[i].append(f.velocities)
            mass[i].append(m * w * f.probs)
    fibers = tuple(FiberMeasure.build(np.vstack(v), np.concatenate(p)) for v, p in zip(vel, mass))
    return MeasureField(base, fibers)


def extend_by_zero(xi: MeasureField, mu: DiscreteMeasure, mass: float) -> MeasureField:
    """Padding of a component field to a larger base with ``delta_0`` fibers.

    ``mass`` is the weight of ``xi.base`` inside ``mu``.
    """
    rest_mask = np.ones(mu.size, dtype=bool)
    lookup = {k.tobytes(): i for i, k in enumerate(grid_keys(mu.points))}
    for key in grid_keys(xi.base.points):
        rest_mask[lookup[key.tobytes()]] = False
    if not rest_mask.any():
        return superpose([(1.0, xi)])
    rest, _ = restrict(mu, rest_mask)
    return superpose([(mass, xi), (1.0 - mass, zero_field(rest))])
