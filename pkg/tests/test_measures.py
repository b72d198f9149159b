import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiberlab.dc_geometry import MaxAffine, Quadratic, graph_chart
from fiberlab.fixtures import random_measure
from fiberlab.measures import (
    MeasureMixture,
    ac_grid,
    dirac,
    from_descriptor,
    make_measure,
    mix,
    restrict,
    sample_dc_curve,
)


def test_normalizes_weights():
    mu = make_measure([(0, 0), (1, 0)], [1, 1])
    assert mu.size == 2
    assert mu.weights.tolist() == [0.5, 0.5]


def test_merges_duplicates():
    mu = make_measure([(0, 0), (0, 0)], [1, 1])
    assert mu.size == 1 and mu.weights[0] == 1.0


@pytest.mark.parametrize(
    "points, weights",
    [([(0, 0)], [0]), ([], []), ([(0, 0), (1, 1)], [1]), ([(0, 0), (1, 1)], [1, -1])],
)
def test_rejects_degenerate_input(points, weights):
    with pytest.raises(ValueError):
        make_measure(points, weights)


def test_restrict_line():
    mu = make_measure([[0.0], [1.0]], [1, 1])
    sub, m = restrict(mu, lambda p: p[:, 0] < 0.5)
    assert m == 0.5
    assert sub.same_as(dirac([0.0]))


def test_restrict_square_top_edge():
    mu = make_measure([(0, 0), (1, 0), (0, 1), (1, 1)])
    sub, m = restrict(mu, lambda p: p[:, 1] == 1)
    assert m == 0.5
    assert sub.points.tolist() == [[0.0, 1.0], [1.0, 1.0]]
    assert sub.weights.tolist() == [0.5, 0.5]


def test_restrict_empty_raises():
    with pytest.raises(ValueError):
        restrict(dirac([0.0]), lambda p: p[:, 0] > 1)


@given(seed=st.integers(0, 2**31), n=st.integers(1, 30), d=st.integers(1, 3))
def test_make_measure_idempotent(seed, n, d):
    mu = random_measure(np.random.default_rng(seed), n, d)
    again = make_measure(mu.points, mu.weights)
    assert again.same_as(mu)


@given(seed=st.integers(0, 2**31), n=st.integers(2, 30))
def test_restrict_then_remix(seed, n):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, n, 2, denom=64)
    mask = rng.random(mu.size) < 0.5
    mask[0], mask[-1] = True, False
    a, m = restrict(mu, mask)
    b, _ = restrict(mu, ~mask)
    back = mix([(m, a), (1 - m, b)])
    assert np.array_equal(back.points, mu.points)
    np.testing.assert_allclose(back.weights, mu.weights, rtol=0, atol=1e-15)


def test_sample_segment():
    chart = graph_chart(1, [MaxAffine([[0.0]], [0.0])])
    mu = sample_dc_curve(chart, 4, ([0.0], [1.0]))
    assert mu.size == 4
    assert np.all(mu.weights == 0.25)
    assert np.all(mu.points[:, 1] == 0)


def test_sample_absolute_value():
    chart = graph_chart(1, [MaxAffine([[1.0], [-1.0]], [0.0, 0.0])])
    mu = sample_dc_curve(chart, 5, ([-1.0], [1.0]))
    assert mu.size == 5
    assert np.array_equal(mu.points[:, 1], np.abs(mu.points[:, 0]))


def test_sample_parabola_second_moment():
    chart = graph_chart(1, [Quadratic(np.array([[2.0]]))])
    mu = sample_dc_curve(chart, 8, ([0.0], [1.0]))
    t = (np.arange(8) + 0.5) / 8
    assert mu.second_moment() == pytest.approx(np.sum(t**2 + t**4) / 8, rel=1e-14)
    np.testing.assert_array_equal(mu.points[:, 1], mu.points[:, 0] ** 2)


def test_ac_grid_uniform():
    mu = ac_grid([0, 0], [1, 1], (4, 5))
    assert mu.size == 20
    np.testing.assert_allclose(mu.weights, 1 / 20)


def test_descriptor_round_trip_17_digits():
    mu = random_measure(np.random.default_rng(3), 12, 3)
    blob = json.dumps(mu.to_dict())
    assert from_descriptor(json.loads(blob)).same_as(mu)


def test_full_mask_has_unit_mass():
    mu = random_measure(np.random.default_rng(4), 7, 2)
    assert mu.mass(np.ones(mu.size, bool)) == 1.0


def test_mixture_labels_and_overlap():
    a, b = dirac([0.0]), make_measure([[1.0], [2.0]])
    mx = MeasureMixture((0.25, 0.75), (a, b), ("atom", "line"))
    assert list(mx.point_labels) == ["atom", "line", "line"]
    with pytest.raises(ValueError):
        MeasureMixture((0.5, 0.5), (a, dirac([0.0])), (0, 1))
