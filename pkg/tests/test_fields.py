import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiberlab.fiber_geometry import w_mu, w_mu_sq
from fiberlab.fields import (
    FiberCoupling,
    FiberMeasure,
    MeasureField,
    barycenter,
    center,
    field_from_dict,
    gamma_of,
    horizontal_interpolate,
    map_field,
    midpoint_double,
    pointwise_product_plan,
    restrict_field,
    scale,
    velocity_of_plan,
    zero_field,
)
from fiberlab.fixtures import random_field, random_measure
from fiberlab.measures import dirac, make_measure
from fiberlab.ot_core import solve_ot


def const_field(mu, velocities, probs=None):
    fib = FiberMeasure.build(velocities, probs)
    return MeasureField(mu, tuple(fib for _ in range(mu.size)))


@pytest.fixture
def base():
    return make_measure([(0, 0), (1, 0), (0, 2)], [1, 2, 1])


def test_barycenter_symmetric_pair(base):
    xi = const_field(base, [(0, 1), (0, -1)])
    assert np.array_equal(barycenter(xi), np.zeros((3, 2)))


def test_barycenter_of_map(base):
    f = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]])
    assert np.array_equal(barycenter(map_field(base, f)), f)


def test_barycenter_direct_sum(base):
    xi = const_field(base, [(3, 0), (0, 3)], [1 / 3, 2 / 3])
    np.testing.assert_allclose(barycenter(xi), [[1, 2]] * 3, rtol=1e-15)


def test_center_examples(base):
    xi = const_field(base, [(0, 1), (0, -1)])
    assert center(xi).same_as(xi)
    f = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]])
    assert center(map_field(base, f)).same_as(zero_field(base))
    one = const_field(dirac([0.0]), [[3.0], [0.0]], [1 / 3, 2 / 3])
    out = center(one).fibers[0]
    np.testing.assert_allclose(out.velocities.ravel(), [-1.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(out.probs, [2 / 3, 1 / 3])


@given(seed=st.integers(0, 2**31))
def test_center_is_centred(seed):
    rng = np.random.default_rng(seed)
    xi = random_field(rng, random_measure(rng, 6, 2))
    assert np.max(np.abs(barycenter(center(xi)))) <= 1e-15


def test_scale_examples(base):
    xi = const_field(base, [(1, 0), (-1, 0)])
    assert scale(1.0, xi).same_as(xi)
    assert scale(0.0, xi).same_as(zero_field(base))
    assert scale(-1.0, xi).same_as(xi)


def test_gamma_of(base):
    assert gamma_of(np.zeros((3, 2)), base).same_as(zero_field(base))
    g = gamma_of(np.tile([1.0, 0.0], (3, 1)), base)
    assert g.norm_sq() == 1.0
    assert scale(-1.0, g).same_as(g)


@given(seed=st.integers(0, 2**31))
def test_gamma_lipschitz(seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, 8, 2)
    f, g = rng.normal(size=(2, mu.size, 2))
    lhs = w_mu(gamma_of(f, mu), gamma_of(g, mu))[0]
    rhs = np.sqrt(np.sum(mu.weights * np.sum((f - g) ** 2, 1)))
    assert lhs <= rhs + 1e-12


def test_velocity_of_plan_examples():
    mu = random_measure(np.random.default_rng(1), 5, 2)
    assert velocity_of_plan(solve_ot(mu, mu)[0]).same_as(zero_field(mu))
    xi = velocity_of_plan(solve_ot(dirac([0.0]), dirac([1.0]))[0])
    assert xi.fibers[0].velocities.tolist() == [[1.0]]
    split = velocity_of_plan(solve_ot(dirac([0.0]), make_measure([[-1.0], [1.0]]))[0])
    assert split.fibers[0].velocities.ravel().tolist() == [-1.0, 1.0]
    assert split.fibers[0].probs.tolist() == [0.5, 0.5]


def _coupling(left, right):
    entries = []
    for f, g in zip(left.fibers, right.fibers):
        p = np.outer(f.probs, g.probs)
        j, l = np.nonzero(p > 0)
        entries.append(np.column_stack([j, l, p[j, l]]))
    return FiberCoupling(left, right, tuple(entries))


def test_interpolation_examples(base):
    left = const_field(base, [(1, 0), (-1, 0)])
    right = const_field(base, [(0, 3)])
    alpha = _coupling(left, right)
    assert horizontal_interpolate(alpha, 0.0).same_as(left)
    assert horizontal_interpolate(alpha, 1.0).same_as(right)
    with pytest.raises(ValueError):
        horizontal_interpolate(alpha, 1.5)


def test_interpolate_antipodes_and_shift():
    mu = dirac([0.0])
    v = const_field(mu, [[2.0]])
    w = const_field(mu, [[-2.0]])
    assert horizontal_interpolate(_coupling(v, w), 0.5).same_as(zero_field(mu))
    mid = horizontal_interpolate(_coupling(zero_field(mu), v), 0.5)
    assert mid.fibers[0].velocities.tolist() == [[1.0]]


def test_midpoint_double_examples(base):
    f = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]])
    assert midpoint_double(map_field(base, f)).same_as(map_field(base, f))
    out = midpoint_double(const_field(dirac([0.0]), [[0.0], [2.0]])).fibers[0]
    assert out.velocities.ravel().tolist() == [0.0, 1.0, 2.0]
    assert out.probs.tolist() == [0.25, 0.5, 0.25]


@given(seed=st.integers(0, 2**31))
def test_midpoint_double_halves_squared_gap(seed):
    rng = np.random.default_rng(seed)
    zeta = random_field(rng, random_measure(rng, 5, 2), max_atoms=3)
    b = barycenter(zeta)
    before = w_mu_sq(zeta, map_field(zeta.base, b))
    after = w_mu_sq(midpoint_double(zeta), map_field(zeta.base, b))
    np.testing.assert_allclose(barycenter(midpoint_double(zeta)), b, atol=1e-14)
    assert after == pytest.approx(0.5 * before, rel=1e-9, abs=1e-15)


def test_product_cap():
    zeta = const_field(dirac([0.0]), [[0.0], [1.0], [2.0]])
    with pytest.raises(ValueError):
        pointwise_product_plan(zeta, cap=8)


def test_restrict_field(base):
    xi = random_field(np.random.default_rng(0), base)
    assert restrict_field(xi, np.ones(3, bool)).same_as(xi)
    sub = restrict_field(xi, lambda p: p[:, 1] == 0)
    assert sub.base.size == 2
    assert sub.fibers[1].same_as(xi.fibers[2])
    with pytest.raises(ValueError):
        restrict_field(xi, np.zeros(3, bool))


def test_field_round_trip(base):
    xi = random_field(np.random.default_rng(9), base)
    assert field_from_dict(xi.to_dict()).same_as(xi)
