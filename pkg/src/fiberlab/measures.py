"""Discrete probability measures on R^d, mixtures and structured generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GRID = 12  # decimals of the duplicate-merging grid

Predicate = Callable[[np.ndarray], np.ndarray]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def grid_keys(points: np.ndarray) -> np.ndarray:
    """Coordinates rounded to the merging grid (``-0.0`` folded into ``0.0``)."""
    return np.round(points, GRID) + 0.0


def normalize_weights(weights: np.ndarray) -> np.ndarray:
    """Scale to unit total unless already normalized to roundoff.

    Skipping the division when the total is within a few ulps of one keeps
    canonicalization idempotent bit for bit.
    """
    total = math.fsum(weights)
    if abs(total - 1.0) > 4.0 * np.finfo(float).eps * max(1, weights.shape[0]):
        weights = weights / total
    return weights


def merge_rows(points: np.ndarray, weights: np.ndarray):
    """Merge rows equal on the 1e-12 grid; sort lexicographically.

    The representative of a merged group is its first occurrence. Returns
    ``(points, weights)`` with zero-weight rows dropped.
    """
    keys = grid_keys(points)
    if points.shape[1] == 0:
        uniq_idx = np.array([0])
        inverse = np.zeros(points.shape[0], dtype=np.int64)
    else:
        _, uniq_idx, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
    merged = np.bincount(inverse, weights=weights, minlength=uniq_idx.shape[0])
    pts = points[uniq_idx]
    keep = merged > 0
    return pts[keep], merged[keep]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure.

    Use :func:`make_measure` to build one from raw data; the constructor
    only validates already-canonical arrays.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or w.ndim != 1 or pts.shape[0] != w.shape[0]:
            raise ValueError("points must be (n, d) and weights (n,)")
        if pts.shape[0] == 0:
            raise ValueError("empty support")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def second_moment(self) -> float:
        return math.fsum(self.weights * np.einsum("ij,ij->i", self.points, self.points))

    def mass(self, mask: np.ndarray) -> float:
        """Mass of the support points selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        if mask.all():
            return 1.0
        return math.fsum(self.weights[mask])

    def index_of(self, x: Sequence[float]) -> int:
        """Index of a support point (grid-equal match) or ``-1``."""
        key = grid_keys(np.asarray(x, dtype=np.float64)[None, :])
        hits = np.flatnonzero(np.all(grid_keys(self.points) == key, axis=1))
        return int(hits[0]) if hits.size else -1

    def same_as(self, other: "DiscreteMeasure") -> bool:
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }


def make_measure(points, weights=None) -> DiscreteMeasure:
    """Build a canonical measure: merge duplicates, sort, normalize.

    Raises
    ------
    ValueError
        On empty support, mismatched lengths, negative weights or zero mass.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("empty support")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise ValueError("points and weights have mismatched lengths")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if math.fsum(w) <= 0:
        raise ValueError("zero total mass")
    pts, w = merge_rows(pts, w)
    return DiscreteMeasure(pts, normalize_weights(w))


def dirac(x) -> DiscreteMeasure:
    return make_measure(np.atleast_2d(np.asarray(x, dtype=np.float64)), [1.0])


def _mask(mu: DiscreteMeasure, predicate) -> np.ndarray:
    if callable(predicate):
        mask = np.asarray(predicate(mu.points), dtype=bool).reshape(-1)
    else:
        mask = np.asarray(predicate, dtype=bool).reshape(-1)
    if mask.shape[0] != mu.size:
        raise ValueError("predicate must give one boolean per support point")
    return mask


def restrict(mu: DiscreteMeasure, predicate) -> tuple[DiscreteMeasure, float]:
    """Normalized restriction to a set and the mass of that set.

    ``predicate`` is a vectorized callable on the ``(n, d)`` point array or a
    boolean mask.
    """
    mask = _mask(mu, predicate)
    mass = mu.mass(mask)
    if mass <= 0:
        raise ValueError("restriction to a set of zero mass")
    w = mu.weights[mask] / mass
    return DiscreteMeasure(mu.points[mask], normalize_weights(w)), mass


def mix(parts: Sequence[tuple[float, DiscreteMeasure]]) -> DiscreteMeasure:
    """Convex combination ``sum m_k mu_k`` (duplicates merged)."""
    parts = [(float(m), mu) for m, mu in parts if m > 0]
    if not parts:
        raise ValueError("empty mixture")
    pts = np.vstack([mu.points for _, mu in parts])
    w = np.concatenate([m * mu.weights for m, mu in parts])
    return make_measure(pts, w)


@dataclass(frozen=True, eq=False)
class MeasureMixture:
    """Labeled mixture ``sum m_k mu_k`` with pairwise disjoint supports."""

    masses: tuple
    components: tuple
    labels: tuple
    measure: DiscreteMeasure = field(init=False)
    point_labels: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (len(self.masses) == len(self.components) == len(self.labels)):
            raise ValueError("masses, components and labels must align")
        if abs(math.fsum(self.masses) - 1.0) > 1e-12 or min(self.masses) < 0:
            raise ValueError("mixture masses must be nonnegative and sum to 1")
        combined = mix(list(zip(self.masses, self.components)))
        total_atoms = sum(c.size for m, c in zip(self.masses, self.components) if m > 0)
        if combined.size != total_atoms:
            raise ValueError("component supports overlap")
        lookup = {k.tobytes(): i for i, k in enumerate(grid_keys(combined.points))}
        lab = np.empty(combined.size, dtype=object)
        for m, comp, tag in zip(self.masses, self.components, self.labels):
            if m <= 0:
                continue
            for key in grid_keys(comp.points):
                lab[lookup[key.tobytes()]] = tag
        object.__setattr__(self, "measure", combined)
        object.__setattr__(self, "point_labels", _frozen(lab))


# --- generators -----------------------------------------------------------


def low_discrepancy_grid(n: int, lo, hi) -> np.ndarray:
    """Deterministic parameter grid: midpoints in 1-D, Halton points otherwise."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    k = lo.shape[0]
    if n < 1:
        raise ValueError("need at least one sample")
    if np.any(hi <= lo):
        raise ValueError("window must be a nondegenerate box")
    if k == 1:
        unit = ((np.arange(n) + 0.5) / n)[:, None]
    else:
        from scipy.stats import qmc

        sampler = qmc.Halton(d=k, scramble=False)
        sampler.fast_forward(1)
        unit = sampler.random(n)
    return lo + unit * (hi - lo)


def sample_dc_curve(chart, n: int, window) -> DiscreteMeasure:
    """Uniform weights on ``chart(X_i)`` for a low-discrepancy grid in ``window``.

    ``window`` is ``(lo, hi)`` with one entry per parameter dimension.
    """
    lo, hi = window
    params = low_discrepancy_grid(n, lo, hi)
    pts = np.array([chart.evaluate(X) for X in params])
    return make_measure(pts)


def ac_grid(lo, hi, shape) -> DiscreteMeasure:
    """Uniform measure on the cell centres of a tensor grid over a box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    axes = [lo[i] + (np.arange(s) + 0.5) / s * (hi[i] - lo[i]) for i, s in enumerate(shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return make_measure(pts)


def atoms(points, weights=None) -> DiscreteMeasure:
    return make_measure(points, weights)


def from_descriptor(desc: dict) -> DiscreteMeasure:
    """Measure from a JSON descriptor.

    Either a plain measure ``{dim, points, weights}`` or a generator
    ``{type: "atoms" | "dc_curve" | "ac_grid", ...}``.
    """
    kind = desc.get("type")
    if kind is None:
        allowed = {"dim", "points", "weights"}
        extra = set(desc) - allowed
        if extra:
            raise ValueError(f"unknown measure fields: {sorted(extra)}")
        pts = np.asarray(desc["points"], dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != int(desc["dim"]):
            raise ValueError("points do not match dim")
        return make_measure(pts, desc.get("weights"))
    if kind == "atoms":
        return atoms(desc["points"], desc.get("weights"))
    if kind == "ac_grid":
        return ac_grid(desc["lo"], desc["hi"], desc["shape"])
    if kind == "dc_curve":
        from .dc_geometry import chart_from_dict

        chart = chart_from_dict(desc["chart"])
        return sample_dc_curve(chart, int(desc["n"]), (desc["lo"], desc["hi"]))
    raise ValueError(f"unknown generator type {kind!r}")
