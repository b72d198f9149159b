import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiberlab.fixtures import random_measure
from fiberlab.measures import dirac, make_measure
from fiberlab.oracles import integer_coupling_min
from fiberlab.ot_core import (
    NotCyclicallyMonotoneError,
    extend_optimal_plan,
    is_cyclically_monotone,
    kantorovich_potential,
    solve_ot,
    sq_dist_matrix,
    truncate_plan,
    wasserstein,
)
from fiberlab.fields import map_field, velocity_of_plan


def line(*xs, weights=None):
    return make_measure(np.array(xs, float)[:, None], weights)


def test_single_pair():
    plan, cost = solve_ot(dirac([0.0]), dirac([1.0]))
    assert cost == 1.0
    assert plan.rows.tolist() == [0] and plan.cols.tolist() == [0] and plan.masses.tolist() == [1.0]


def test_monotone_matching():
    plan, cost = solve_ot(line(0, 1), line(2, 3))
    assert cost == 4.0
    assert plan.rows.tolist() == [0, 1] and plan.cols.tolist() == [0, 1]


def test_identity_plan():
    mu = random_measure(np.random.default_rng(0), 9, 2)
    plan, cost = solve_ot(mu, mu)
    assert cost == 0.0
    assert np.array_equal(plan.rows, plan.cols)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_ot(dirac([0.0]), dirac([0.0, 0.0]))


@pytest.mark.parametrize(
    "mu, nu, expected",
    [
        (dirac([0.0, 0.0]), dirac([0.0, 0.0]), 0.0),
        (dirac([0.0, 0.0]), dirac([3.0, 4.0]), 5.0),
        (line(0, 1), line(0.25, 0.75), 0.25),
    ],
)
def test_wasserstein_examples(mu, nu, expected):
    assert wasserstein(mu, nu) == pytest.approx(expected, abs=1e-15)


@given(seed=st.integers(0, 2**31))
def test_wasserstein_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_measure(rng, int(rng.integers(1, 7)), 2) for _ in range(3))
    assert wasserstein(a, b) == pytest.approx(wasserstein(b, a), abs=1e-12)
    assert wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-9


def _enumerate_vertices(a_units, b_units, C):
    """Brute force over all integer couplings for tiny instances."""
    n, m = C.shape
    best = np.inf
    cells = list(itertools.product(range(n), range(m)))

    def rec(k, ra, cb, acc):
        nonlocal best
        if k == len(cells):
            if not any(ra) and not any(cb):
                best = min(best, acc)
            return
        i, j = cells[k]
        for q in range(min(ra[i], cb[j]) + 1):
            ra[i] -= q
            cb[j] -= q
            rec(k + 1, ra, cb, acc + q * C[i, j])
            ra[i] += q
            cb[j] += q

    rec(0, list(a_units), list(b_units), 0.0)
    return best


def test_integer_oracle_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = rng.multinomial(4, np.ones(3) / 3)
        b = rng.multinomial(4, np.ones(2) / 2)
        C = rng.integers(0, 9, (3, 2)).astype(float)
        assert integer_coupling_min(a, b, C)[0] * 4 == pytest.approx(_enumerate_vertices(a, b, C))


@given(seed=st.integers(0, 2**31))
def test_solver_matches_integer_oracle(seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, int(rng.integers(1, 7)), 2, denom=12)
    nu = random_measure(rng, int(rng.integers(1, 7)), 2, denom=12)
    a = np.rint(mu.weights * 12).astype(int)
    b = np.rint(nu.weights * 12).astype(int)
    ref, _ = integer_coupling_min(a, b, sq_dist_matrix(mu.points, nu.points))
    _, cost = solve_ot(mu, nu)
    assert cost == pytest.approx(ref, rel=4e-15, abs=1e-15)


@given(seed=st.integers(0, 2**31))
def test_plan_support_is_monotone(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, 8, 2), random_measure(rng, 9, 2)
    plan, _ = solve_ot(mu, nu)
    assert is_cyclically_monotone((plan.x, plan.y)) == (True, 0.0)


def test_two_cycle_violation():
    ok, worst = is_cyclically_monotone([((0.0,), (1.0,)), ((1.0,), (0.0,))], L=2)
    assert not ok and worst == 2.0


def test_single_pair_is_monotone():
    assert is_cyclically_monotone([((0.0,), (1.0,))]) == (True, 0.0)


def test_cycle_length_below_two_rejected():
    with pytest.raises(ValueError):
        is_cyclically_monotone([((0.0,), (1.0,)), ((1.0,), (2.0,))], L=1)


def test_potential_examples():
    pot = kantorovich_potential([((0.0,), (1.0,))], 1.0, queries=[[0.0], [1.0]])
    assert pot.values.tolist() == [0.0, 0.5]


def test_potential_rejects_non_monotone():
    with pytest.raises(NotCyclicallyMonotoneError):
        kantorovich_potential([((0.0,), (1.0,)), ((1.0,), (-1.0,))])


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_potential_subgradient_property(tau):
    rng = np.random.default_rng(11)
    mu, nu = random_measure(rng, 7, 2), random_measure(rng, 6, 2)
    plan, _ = solve_ot(mu, nu)
    X, V = plan.x, (plan.y - plan.x) / tau
    queries = rng.normal(size=(40, 2))
    pot = kantorovich_potential((X, V), tau, queries)
    phi_x = pot.evaluate(X)
    for x, v, px in zip(X, V, phi_x):
        lower = px + (queries - x) @ v - np.sum((queries - x) ** 2, 1) / (2 * tau)
        assert np.all(pot.values >= lower - 1e-9)
    assert pot.support_values[0] == 0.0


def test_extend_trivial_chain():
    plan, _ = solve_ot(dirac([0.0]), dirac([1.0]))
    eta = velocity_of_plan(plan)
    xi = extend_optimal_plan(eta, dirac([0.0]), 0.5)
    assert xi.base.size == 1
    assert xi.fibers[0].velocities.tolist() == [[1.0]]


def test_extend_lambda_endpoints():
    rng = np.random.default_rng(2)
    mu, nu, mu2 = (random_measure(rng, 5, 2) for _ in range(3))
    eta = velocity_of_plan(solve_ot(mu, nu)[0])
    assert extend_optimal_plan(eta, mu2, 0.0).same_as(eta)
    gamma = extend_optimal_plan(eta, mu2, 1.0)
    assert gamma.base.same_as(mu2)
    X, V = gamma.pairs()
    assert is_cyclically_monotone((X, X + V))[0]


@given(seed=st.integers(0, 2**31), lam=st.floats(0.05, 0.95))
def test_extension_is_optimal_between_marginals(seed, lam):
    rng = np.random.default_rng(seed)
    mu, nu, mu2 = random_measure(rng, 4, 2), random_measure(rng, 4, 2), random_measure(rng, 3, 2)
    eta = velocity_of_plan(solve_ot(mu, nu)[0])
    xi = extend_optimal_plan(eta, mu2, lam)
    X, V = xi.pairs()
    w = xi.atom_weights()
    own = float(np.sum(w * np.sum(V**2, 1)))
    assert is_cyclically_monotone((X, X + V)) == (True, 0.0)
    assert solve_ot(xi.base, make_measure(X + V, w))[1] == pytest.approx(own, rel=1e-12, abs=1e-14)


def test_extend_rejects_non_monotone():
    eta = map_field(line(0, 1), np.array([[1.0], [-1.0]]))
    with pytest.raises(NotCyclicallyMonotoneError):
        extend_optimal_plan(eta, dirac([0.0]), 0.5)


def test_truncate_unchanged_when_inside():
    plan, _ = solve_ot(line(-1, 1), line(-2, 2))
    assert truncate_plan(plan, 2.0) is plan


def test_truncate_no_admissible_target():
    plan, _ = solve_ot(dirac([0.0]), dirac([2.0]))
    with pytest.raises(ValueError):
        truncate_plan(plan, 1.0)


def test_truncate_reroutes_monotonically():
    plan, _ = solve_ot(line(-1, 1), line(-2, 3))
    out = truncate_plan(plan, 2.0)
    assert np.all(np.abs(out.y) <= 2.0)
    assert is_cyclically_monotone((out.x, out.y))[0]
    np.testing.assert_array_equal(out.source.weights, plan.source.weights)


@given(seed=st.integers(0, 2**31))
def test_truncate_only_changes_outside_entries(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, 6, 2), random_measure(rng, 6, 2)
    plan, _ = solve_ot(mu, nu)
    radii = np.sort(np.linalg.norm(plan.y, axis=1))
    R = radii[len(radii) // 2]
    out = truncate_plan(plan, R)
    inside = np.linalg.norm(plan.y, axis=1) <= R
    kept = {(int(i), tuple(y)) for i, y in zip(plan.rows[inside], plan.y[inside])}
    assert kept <= {(int(i), tuple(y)) for i, y in zip(out.rows, out.y)}
    assert is_cyclically_monotone((out.x, out.y))[0]


def test_plan_csv_header():
    plan, _ = solve_ot(dirac([0.0, 0.0]), dirac([1.0, 2.0]))
    assert plan.to_csv().splitlines()[0] == "i,j,mass,x0,x1,y0,y1"


def _fiber_w2_lp(f, g):
    from scipy.optimize import linprog

    C = sq_dist_matrix(f.velocities, g.velocities)
    n, m = C.shape
    A = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    return linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([f.probs, g.probs]), method="highs").fun


def test_truncation_gap_is_not_monotone_in_radius():
    """Rerouting to the argmax target can move mass farther as the ball grows."""
    mu = make_measure([(2, -4), (3, -2)])
    nu = make_measure([(-4, 1), (-3, 2), (4, -3)])
    plan, _ = solve_ot(mu, nu)
    eta = velocity_of_plan(plan)
    gaps = []
    for r2 in (13, 17):
        cut = velocity_of_plan(truncate_plan(plan, np.sqrt(r2)))
        gaps.append(sum(w * _fiber_w2_lp(f, g) for w, f, g in zip(mu.weights, eta.fibers, cut.fibers)))
    assert gaps[0] == pytest.approx(76 / 3, rel=1e-9)
    assert gaps[1] == pytest.approx(26.0, rel=1e-9)
