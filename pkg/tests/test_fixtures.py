import numpy as np
import pytest

from fiberlab.fiber_geometry import metric_dot
from fiberlab.fields import map_field
from fiberlab.fixtures import (
    Bump,
    decomposition_mixture,
    parabola,
    square_boundary,
    standard_bumps,
    weak_escape_sequence,
)
from fiberlab.oracles import square_boundary_integral, square_midpoint_prediction


def test_parabola_contains_blowup_center():
    assert parabola(4010).mu.index_of([0.3, 0.09]) >= 0


def test_mixture_thirds():
    fix = decomposition_mixture()
    assert fix.mixture.masses == (1 / 3, 1 / 3, 1 / 3)
    assert np.bincount(fix.labels()).tolist() == [2, 100, 100]


def test_square_boundary_unit_tangents():
    mu, zeta = square_boundary(16)
    assert mu.size == 64
    v = np.vstack([f.velocities for f in zeta.fibers])
    np.testing.assert_array_equal(np.linalg.norm(v, axis=1), 1.0)


def test_bumps_vanish_near_boundary_of_support():
    b = Bump((0.5, 0.5), 0.3, 1.0)
    assert b.value(np.array([[0.5, 0.9]]))[0] == 0.0
    assert b.value(np.array([[0.5, 0.5]]))[0] > 0


def test_grad_matches_finite_difference():
    b = standard_bumps(1)[0]
    x = np.asarray(b.center) + 0.1 * b.radius
    h = 1e-6
    fd = [(b.value((x + h * e)[None])[0] - b.value((x - h * e)[None])[0]) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(b.grad(x[None])[0], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("bump", standard_bumps(10), ids=lambda b: f"r{b.radius:.2f}")
def test_boundary_integral_vanishes(bump):
    assert abs(square_boundary_integral(bump)) <= 1e-8


@pytest.mark.parametrize("n", [128, 256])
def test_midpoint_prediction_matches_sum(n):
    """Riemann sums of the tangential derivative follow the midpoint-rule error term."""
    mu, zeta = square_boundary(n)
    worst = 0.0
    for bump in standard_bumps(10):
        val = metric_dot(map_field(mu, bump.grad), zeta)
        pred = square_midpoint_prediction(bump, n)
        if abs(pred) > 1e-12:
            worst = max(worst, abs(val - pred) / abs(pred))
    assert worst <= 1e-2


def test_weak_escape_structure():
    seq = weak_escape_sequence((2, 4))
    assert [xi.base.size for xi in seq] == [4, 8, 8]
    assert seq[-1].fibers[0].velocities.ravel().tolist() == [-1.0, 1.0]
