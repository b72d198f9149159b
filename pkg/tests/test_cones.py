import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiberlab.cones import (
    GrassmannSection,
    closedness_regression,
    doubling_limit,
    estimate_section,
    max_principal_angle,
    membership,
    orthogonal_section,
    project_onto_section_cone,
    section_from_dict,
)
from fiberlab.fiber_geometry import metric_dot, w_mu
from fiberlab.fields import FiberMeasure, MeasureField, center, gamma_of, map_field, scale
from fiberlab.fixtures import (
    converging_gamma_sequence,
    random_field,
    random_measure,
    segment,
    weak_escape_sequence,
)
from fiberlab.measures import dirac

E1, E2 = np.eye(2)


@pytest.fixture
def mu():
    return random_measure(np.random.default_rng(0), 6, 2)


def test_orthogonal_section(mu):
    D = GrassmannSection.constant(mu, [E1])
    perp = orthogonal_section(D)
    assert all(max_principal_angle(b, E2[None]) <= 1e-15 for b in perp.bases)
    zero = GrassmannSection(mu, tuple(np.zeros((0, 2)) for _ in range(mu.size)))
    assert np.all(orthogonal_section(zero).dims() == 2)


def test_membership_examples(mu):
    D = GrassmannSection.constant(mu, [E2])
    rep = membership(gamma_of(np.tile(E2, (mu.size, 1)), mu), D)
    assert rep.verdict and rep.centred_defect == 0 and rep.graph_mass_defect == 0
    rep = membership(gamma_of(np.tile(E1, (mu.size, 1)), mu), D)
    assert not rep.verdict and rep.graph_mass_defect == pytest.approx(1.0)
    f = np.tile([3.0, 4.0], (mu.size, 1))
    assert membership(map_field(mu, f), D).centred_defect == pytest.approx(5.0)


def test_projection_on_graph_is_identity(mu):
    D = GrassmannSection.constant(mu, [E2])
    xi = gamma_of(np.tile(2 * E2, (mu.size, 1)), mu)
    proj, resid = project_onto_section_cone(xi, D)
    assert proj.same_as(xi)
    assert resid.norm_sq() == 0.0


def test_projection_diagonal(mu):
    D = GrassmannSection.constant(mu, [E1])
    diag = np.tile([1.0, 1.0], (mu.size, 1)) / np.sqrt(2)
    proj, resid = project_onto_section_cone(gamma_of(diag, mu), D)
    expect_p = gamma_of(np.tile(E1 / np.sqrt(2), (mu.size, 1)), mu)
    expect_r = gamma_of(np.tile(E2 / np.sqrt(2), (mu.size, 1)), mu)
    assert w_mu(proj, expect_p)[0] <= 1e-15
    assert w_mu(resid, expect_r)[0] <= 1e-15


def test_projection_rejects_uncentred(mu):
    with pytest.raises(ValueError):
        project_onto_section_cone(map_field(mu, np.ones((mu.size, 2))), GrassmannSection.constant(mu, [E1]))


@given(seed=st.integers(0, 2**31))
def test_projection_pythagoras(seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, 5, 3)
    xi = center(random_field(rng, mu))
    D = GrassmannSection.from_function(mu, lambda x: rng.normal(size=(int(rng.integers(0, 4)), 3)))
    proj, resid = project_onto_section_cone(xi, D)
    assert xi.norm_sq() == pytest.approx(proj.norm_sq() + resid.norm_sq(), abs=1e-10)
    g = np.array([b.T @ rng.normal(size=b.shape[0]) for b in D.bases])
    assert abs(metric_dot(resid, gamma_of(g, mu))) <= 1e-9


def test_doubling_deterministic_gaps_vanish(mu):
    f = np.random.default_rng(1).normal(size=(mu.size, 2))
    _, trace = doubling_limit(map_field(mu, f), map_field(mu, -f), 3)
    assert trace.gaps_plus == (0.0, 0.0, 0.0, 0.0)


def test_doubling_variance_halving():
    base = dirac([0.0])
    plus = MeasureField(base, (FiberMeasure.build([[0.0], [2.0]]),))
    minus = scale(-1.0, plus)
    f_plus, trace = doubling_limit(plus, minus, 4)
    assert f_plus.tolist() == [[1.0]]
    assert trace.gaps_plus == (1.0, 0.5, 0.25, 0.125, 0.0625)
    np.testing.assert_array_equal(trace.ratios(), 0.5)


def test_doubling_needs_centred_half_sum(mu):
    f = np.ones((mu.size, 2))
    with pytest.raises(ValueError):
        doubling_limit(map_field(mu, f), map_field(mu, f), 1)


def test_estimate_section_examples():
    mu = random_measure(np.random.default_rng(2), 4, 3)
    e = np.eye(3)
    D = estimate_section([gamma_of(np.tile(e[0], (4, 1)), mu)])
    assert all(max_principal_angle(b, e[:1]) <= 1e-15 for b in D.bases)
    D = estimate_section([gamma_of(np.tile(e[0], (4, 1)), mu), gamma_of(np.tile(e[1], (4, 1)), mu)])
    assert all(max_principal_angle(b, e[:2]) <= 1e-15 for b in D.bases)


def test_estimate_section_noise_threshold():
    eps = 1e-5
    rng = np.random.default_rng(3)
    line = np.array([1.0, 2.0]) / np.sqrt(5)
    atoms = np.outer(rng.normal(size=6), line) + eps * rng.uniform(-1, 1, (6, 2))
    xi = MeasureField(dirac([0.0, 0.0]), (FiberMeasure.build(atoms),))
    D = estimate_section([xi], svd_tol=10 * eps)
    assert D.dims().tolist() == [1]
    assert max_principal_angle(D.bases[0], line[None]) <= 10 * eps


def test_estimate_section_empty_observation():
    D = estimate_section([map_field(dirac([0.0, 0.0]), [[0.0, 0.0]])])
    assert D.dims().tolist() == [0]


def test_closedness_constant_sequence(mu):
    D = GrassmannSection.constant(mu, [E1])
    xi = gamma_of(np.tile([1.0, 0.5], (mu.size, 1)), mu)
    rep = closedness_regression([xi, xi, xi], D)
    assert rep.limit_defect == rep.defects[0]


def test_closedness_gamma_sequence():
    seg = segment(30)
    D = GrassmannSection.constant(seg.mu, [E2])
    rep = closedness_regression(converging_gamma_sequence(seg.mu, E2), D)
    assert rep.passed and rep.limit_defect == 0.0


def test_weak_escape_label():
    rep = closedness_regression(weak_escape_sequence(), lambda b: GrassmannSection.constant(b, [[1.0]]))
    assert rep.label == "solenoidal-not-tangent"
    assert rep.limit_centred_defect == 0.0


def test_section_round_trip(mu):
    D = GrassmannSection.constant(mu, [[1.0, 1.0]])
    back = section_from_dict(D.to_dict())
    assert all(np.array_equal(a, b) for a, b in zip(back.bases, D.bases))
