"""Verification suites: each runs a family of checks and returns measured values vs bounds."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from . import fixtures as fx
from .cones import (
    GrassmannSection,
    closedness_regression,
    doubling_limit,
    max_principal_angle,
    orthogonal_section,
    orthonormal_rows,
    project_onto_section_cone,
)
from .decomposition import (
    chebyshev_bound_check,
    maxmin_component_mass,
    cover_candidates,
    decompose,
    estimate_dtan,
    frame_field,
    blowup_sequence,
    verify_tangent_alignment,
)
from .fiber_geometry import is_orthogonal_to_gamma, metric_dot, metric_dot_fibers, w_mu_sq
from .fields import FiberMeasure, MeasureField, barycenter, gamma_of, map_field, velocity_of_plan, zero_field
from .measures import make_measure
from .oracles import integer_coupling_min, square_midpoint_prediction
from .ot_core import extend_optimal_plan, is_cyclically_monotone, solve_ot, truncate_plan


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.17g} {self.relation} {self.bound:.17g}"


def _check(name, value, bound, relation="<="):
    value, bound = float(value), float(bound)
    ok = {"<=": value <= bound, ">=": value >= bound, "==": value == bound}[relation]
    return Check(name, value, bound, bool(ok), relation)


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, bound, relation="<=") -> Check:
        c = _check(name, value, bound, relation)
        self.checks.append(c)
        return c


@dataclass(frozen=True)
class SuiteContext:
    seed: int = 0
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def param(self, key: str, default):
        return self.params.get(key, default)


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# --- transport --------------------------------------------------------------------


def suite_exact_ot(ctx: SuiteContext) -> SuiteReport:
    """Solver cost against the integer-coupling oracle on small rational instances."""
    rep = SuiteReport("exact-ot")
    rng = ctx.rng(1)
    count = int(ctx.param("instances", 200))
    denom = int(ctx.param("denominator", 12))
    worst, mono_worst = 0.0, 0.0
    start = time.perf_counter()
    for _ in range(count):
        n, m = (int(v) for v in rng.integers(1, 7, size=2))
        d = int(rng.integers(1, 4))
        a = fx._integer_split(rng, denom, n)
        b = fx._integer_split(rng, denom, m)
        x = rng.uniform(-1, 1, (n, d))
        y = rng.uniform(-1, 1, (m, d))
        C = ((x[:, None] - y[None]) ** 2).sum(-1)
        ref, _ = integer_coupling_min(a, b, C)
        plan, cost = solve_ot(make_measure(x, a / denom), make_measure(y, b / denom))
        worst = max(worst, abs(cost - ref) / max(1.0, ref))
        ok, viol = is_cyclically_monotone((plan.x, plan.y))
        mono_worst = max(mono_worst, viol if not ok else 0.0)
    elapsed = time.perf_counter() - start
    rep.add("cost vs oracle, relative", worst, ctx.tol("ot_exact", 4e-15))
    rep.add("plan support monotonicity violation", mono_worst, 0.0, "==")
    rep.add("runtime seconds", elapsed, ctx.tol("ot_runtime", 10.0))
    return rep


# --- scalar product ---------------------------------------------------------------


def maxcorr_lp(f: FiberMeasure, g: FiberMeasure) -> float:
    """Maximal correlation of two fibers by a generic LP solver."""
    k, l = f.size, g.size
    M = f.velocities @ g.velocities.T
    A = np.zeros((k + l, k * l))
    for j in range(k):
        A[j, j * l:(j + 1) * l] = 1.0
    for c in range(l):
        A[k + c, c::l] = 1.0
    res = linprog(-M.ravel(), A_eq=A, b_eq=np.concatenate([f.probs, g.probs]), bounds=(0, None), method="highs")
    return float(-res.fun)


def suite_scalar_product(ctx: SuiteContext) -> SuiteReport:
    """Locality of the scalar product, polarization and nonnegativity on centred fields."""
    rep = SuiteReport("scalar-product")
    rng = ctx.rng(2)
    pairs = int(ctx.param("pairs", 100))
    max_base = int(ctx.param("max_base", 50))
    loc, pol, neg = 0.0, 0.0, 0.0
    rows = []
    for t in range(pairs):
        n = int(rng.integers(1, max_base + 1))
        d = int(rng.integers(1, 4))
        mu = fx.random_measure(rng, n, d)
        xi = fx.random_field(rng, mu, 4, centred=bool(t % 2 == 0))
        zeta = fx.random_field(rng, mu, 4)
        dots = metric_dot_fibers(xi, zeta)
        ref = math.fsum(w * maxcorr_lp(f, g) for w, f, g in zip(mu.weights, xi.fibers, zeta.fibers))
        loc = max(loc, abs(dots.sum_weighted - ref))
        p = abs(2 * dots.sum_weighted - (xi.norm_sq() + zeta.norm_sq() - dots.w_sq))
        pol = max(pol, p)
        if t % 2 == 0:
            neg = max(neg, -dots.sum_weighted)
        rows.append((t, n, d, dots.sum_weighted, ref, p))
    rep.add("metric_dot vs per-fiber LP", loc, ctx.tol("locality", 1e-10))
    rep.add("polarization residual", pol, ctx.tol("polarization", 1e-10))
    rep.add("negative part for centred left field", neg, ctx.tol("nonneg", 1e-10))
    rep.tables["scalar_product"] = _table(["pair", "n", "d", "metric_dot", "lp_reference", "polarization"], rows)
    return rep


def suite_gamma_orthogonality(ctx: SuiteContext) -> SuiteReport:
    """Zero pairing with a symmetric field iff atoms are orthogonal to its direction."""
    rep = SuiteReport("gamma-orthogonality")
    rng = ctx.rng(3)
    count = int(ctx.param("fields", 100))
    disagreements = 0
    orth_seen = 0
    for t in range(count):
        n = int(rng.integers(1, 20))
        d = int(rng.integers(1, 4))
        mu = fx.random_measure(rng, n, d)
        f = rng.normal(size=(n, d))
        xi = fx.random_perp_field(rng, mu, f) if t % 2 == 0 else fx.random_field(rng, mu, 4, centred=True)
        dot_zero = metric_dot(xi, gamma_of(f, mu)) <= ctx.tol("dot_zero", 1e-9)
        atoms_zero = is_orthogonal_to_gamma(xi, f, tol=ctx.tol("atom_zero", 1e-7))[0]
        orth_seen += int(atoms_zero)
        disagreements += int(dot_zero != atoms_zero)
    rep.add("counterexamples", disagreements, 0, "==")
    rep.add("orthogonal cases exercised", orth_seen, 1, ">=")
    return rep


# --- cones -------------------------------------------------------------------------


def _random_section(rng, mu, dims=None) -> GrassmannSection:
    bases = []
    for i in range(mu.size):
        k = int(rng.integers(0, mu.dim + 1)) if dims is None else int(dims)
        bases.append(orthonormal_rows(rng.normal(size=(k, mu.dim)), mu.dim) if k else np.zeros((0, mu.dim)))
    return GrassmannSection(mu, tuple(bases))


def suite_projection(ctx: SuiteContext) -> SuiteReport:
    """Pythagoras, residual orthogonality and the symmetric equality case."""
    rep = SuiteReport("projection")
    rng = ctx.rng(4)
    pyth, orth, eq = 0.0, 0.0, 0.0
    for _ in range(int(ctx.param("fields", 20))):
        n = int(rng.integers(2, 15))
        d = int(rng.integers(2, 4))
        mu = fx.random_measure(rng, n, d)
        D = _random_section(rng, mu)
        xi = fx.random_field(rng, mu, 4, centred=True)
        p, r = project_onto_section_cone(xi, D)
        pyth = max(pyth, abs(xi.norm_sq() - p.norm_sq() - r.norm_sq()))
        for _ in range(int(ctx.param("selections", 20))):
            g = np.array([rng.normal(size=b.shape[0]) @ b if b.shape[0] else np.zeros(d) for b in D.bases])
            gam = gamma_of(g, mu)
            orth = max(orth, abs(metric_dot(r, gam)))
            eq = max(eq, abs(metric_dot(xi, gam) - metric_dot(p, gam)))
    rep.add("Pythagoras residual", pyth, ctx.tol("pythagoras", 1e-10))
    rep.add("residual pairing with symmetric cone fields", orth, ctx.tol("residual_orth", 1e-9))
    rep.add("equality case for symmetric fields", eq, ctx.tol("equality", 1e-9))
    return rep


def suite_doubling(ctx: SuiteContext) -> SuiteReport:
    """Midpoint doubling halves the squared gap to the barycenter map."""
    rep = SuiteReport("doubling")
    rng = ctx.rng(5)
    iters = int(ctx.param("iterations", 6))
    worst_ratio, worst_final = 0.0, 0.0
    rows = []
    for t in range(int(ctx.param("fields", 20))):
        n = int(rng.integers(1, 8))
        d = int(rng.integers(1, 4))
        mu = fx.random_measure(rng, n, d)
        zp = fx.random_two_atom_field(rng, mu)
        zm_raw = fx.random_two_atom_field(rng, mu)
        shift = barycenter(zm_raw) + barycenter(zp)
        zm = MeasureField(mu, tuple(FiberMeasure.build(f.velocities - s, f.probs) for f, s in zip(zm_raw.fibers, shift)))
        _, trace = doubling_limit(zp, zm, iters)
        ratios = np.concatenate([trace.ratios(), np.asarray(trace.gaps_minus[1:]) / np.asarray(trace.gaps_minus[:-1])])
        worst_ratio = max(worst_ratio, float(np.max(np.abs(ratios - 0.5))))
        sup = trace.superposition_gap_sq
        worst_final = max(worst_final, sup[-1] / sup[0])
        rows.append((t, sup[0], sup[-1], math.sqrt(sup[-1] / sup[0])))
    rep.add("squared-gap ratio deviation from 1/2", worst_ratio, ctx.tol("ratio", 1e-6))
    rep.add("final / initial squared superposition gap", worst_final, ctx.tol("final_gap", 2.0**-3))
    rep.tables["doubling"] = _table(["field", "initial_sq", "final_sq", "distance_ratio"], rows)
    return rep


def suite_chebyshev(ctx: SuiteContext) -> SuiteReport:
    """Mass of light balls against ``16 (d - k) W^2`` for random perturbations of the frame field."""
    rep = SuiteReport("chebyshev")
    rng = ctx.rng(6)
    per = int(ctx.param("eta_per_case", 100))
    worst = -math.inf
    exact_ok = True
    rows = []
    for d in (1, 2, 3):
        for k in range(d):
            mu = fx.random_measure(rng, int(ctx.param("base", 8)), d)
            D = _random_section(rng, mu, dims=d - k)
            xi = frame_field(D)
            dyadic = make_measure(mu.points)
            axes = GrassmannSection.constant(dyadic, np.eye(d)[: d - k])
            lhs0, rhs0 = chebyshev_bound_check(zero_field(dyadic), axes)
            exact_ok &= lhs0 == 1.0 and rhs0 == 16.0 * (d - k)
            rows.append((d, k, "zero", lhs0, rhs0))
            for _ in range(per):
                fibers = []
                for f in xi.fibers:
                    keep = rng.random(f.size) < 0.7
                    v = f.velocities + rng.normal(scale=rng.uniform(0, 0.8), size=f.velocities.shape)
                    extra = rng.normal(size=(int(rng.integers(0, 3)), d))
                    fibers.append(FiberMeasure.build(np.vstack([v[keep], extra]) if keep.any() or len(extra) else v))
                eta = MeasureField(mu, tuple(fibers))
                lhs, rhs = chebyshev_bound_check(eta, D, xi)
                worst = max(worst, lhs - rhs)
    rep.add("max lhs - rhs", worst, ctx.tol("chebyshev", 1e-9))
    rep.add("zero field gives (1, 16(d-k)) exactly", float(exact_ok), 1.0, "==")
    rep.tables["chebyshev_zero"] = _table(["d", "k", "eta", "lhs", "rhs"], rows)
    return rep


# --- decomposition -------------------------------------------------------------------


def suite_segment(ctx: SuiteContext) -> SuiteReport:
    """Vertical splitting on a segment recovers the normal line; tangents match the complement."""
    rep = SuiteReport("segment")
    seg = fx.segment(int(ctx.param("n", 200)))
    Dt = estimate_dtan(seg.mu, fx.vertical_split_family(seg.mu, float(ctx.param("eps", 1e-2))))
    e2 = np.array([[0.0, 1.0]])
    angles = [max_principal_angle(b, e2) for b in Dt.bases]
    rep.add("normal section angle to e2", max(angles), ctx.tol("angle", 1e-6))
    report = verify_tangent_alignment(seg.mu, [seg.chart], orthogonal_section(Dt))
    rep.add("tangent plane vs solenoidal section", report.max_defect, ctx.tol("alignment", 1e-6))
    rep.add("exceptional mass", report.exceptional_mass, report.threshold)
    rep.tables["angles"] = report.to_csv(seg.mu)
    return rep


def suite_square(ctx: SuiteContext) -> SuiteReport:
    """Pairing of gradient fields with the tangent field of the square boundary."""
    rep = SuiteReport("square-solenoidal")
    sizes = [int(s) for s in ctx.param("sizes", [128, 256, 512, 1024])]
    rows = []
    worst_factor, worst_final, worst_oracle = math.inf, 0.0, 0.0
    for j, bump in enumerate(fx.standard_bumps()):
        vals = []
        for n in sizes:
            mu, zeta = fx.square_boundary(n)
            val = metric_dot(map_field(mu, bump.grad(mu.points)), zeta)
            pred = square_midpoint_prediction(bump, n)
            vals.append(val)
            worst_oracle = max(worst_oracle, abs(val - pred) / max(abs(pred), 1e-300))
            rows.append((j, n, val, pred))
        a = np.abs(vals)
        worst_factor = min(worst_factor, float(np.min(a[:-1] / a[1:])))
        worst_final = max(worst_final, float(a[-1]))
    rep.add("smallest decrease factor per doubling", worst_factor, ctx.tol("factor", 1.8), ">=")
    rep.add(f"largest |metric_dot| at n = {sizes[-1]}", worst_final, ctx.tol("final", 1e-2))
    rep.add("relative gap to midpoint-rule prediction", worst_oracle, ctx.tol("oracle", 1e-2))
    rep.tables["square_decay"] = _table(["bump", "n", "metric_dot", "prediction"], rows)
    return rep


def _decomposition_parts(ctx: SuiteContext):
    fix = fx.decomposition_mixture(int(ctx.param("n_curve", 100)))
    Dt = estimate_dtan(fix.mu, list(fix.targets))
    return fix, Dt, decompose(fix.mu, Dt, kind="tan")


def suite_decomposition(ctx: SuiteContext) -> SuiteReport:
    """Atoms, curve and grid are recovered with one third of the mass each."""
    rep = SuiteReport("decomp")
    fix, Dt, res = _decomposition_parts(ctx)
    labels = fix.labels()
    for k in range(3):
        rep.add(f"|m_{k} - 1/3|", abs(res.masses[k] - 1.0 / 3.0), ctx.tol("mass", 0.0))
        direct = fix.mu.mass(labels == k)
        rep.add(f"m_{k} vs labeled mass", abs(res.masses[k] - direct), 0.0, "==")
    rep.add("misclassified points", int(np.sum(res.classification != labels)), 0, "==")
    tang = fix.curve_tangents()
    on_curve = np.flatnonzero(labels == 1)
    cos = max(float(np.max(np.abs(Dt.bases[i] @ tang[i]))) for i in on_curve)
    rep.add("normal section vs curve tangents, |cos|", cos, ctx.tol("orth", 1e-6))
    dims_ok = all(Dt.bases[i].shape[0] == 2 - labels[i] for i in range(fix.mu.size))
    rep.add("normal section has dim d - k on component k", float(dims_ok), 1.0, "==")
    rep.tables["classification"] = res.to_csv(Dt)
    return rep


def suite_maxmin(ctx: SuiteContext) -> SuiteReport:
    """Max-min and min-max over candidate covers equal the component masses."""
    rep = SuiteReport("maxmin")
    fix, _, _ = _decomposition_parts(ctx)
    rng = ctx.rng(10)
    labels = fix.labels()
    bad_order, bad_direct = 0, 0
    for _ in range(int(ctx.param("predicates", 20))):
        w = rng.normal(size=2)
        c = float(rng.uniform(-1, 1))
        A = fix.mu.points @ w > c
        for k in range(3):
            B, C = cover_candidates(fix.mixture, k, rng)
            res = maxmin_component_mass(fix.mixture, A, B, C)
            direct = fix.mu.mass(A & (labels == k))
            bad_order += int(res.maxmin != res.minmax)
            bad_direct += int(res.maxmin != direct)
    rep.add("max-min differs from min-max", bad_order, 0, "==")
    rep.add("max-min differs from component mass", bad_direct, 0, "==")
    return rep


def suite_appendix(ctx: SuiteContext) -> SuiteReport:
    """Extension stays optimal; truncation stays monotone with gap decreasing in the radius."""
    rep = SuiteReport("appendix")
    rng = ctx.rng(11)
    ext_worst, trunc_bad, gap_increase = 0.0, 0, 0.0
    rows = []
    for t in range(int(ctx.param("instances", 50))):
        d = int(ctx.param("dim", 2))
        mu = fx.random_measure(rng, int(rng.integers(2, 6)), d)
        nu = fx.random_measure(rng, int(rng.integers(2, 6)), d)
        plan, _ = solve_ot(mu, nu)
        xi = velocity_of_plan(plan)
        mu2 = fx.random_measure(rng, int(rng.integers(1, 4)), d)
        ext = extend_optimal_plan(xi, mu2, float(rng.uniform(0.1, 0.9)))
        X, V = ext.pairs()
        ok, viol = is_cyclically_monotone((X, X + V))
        ext_worst = max(ext_worst, 0.0 if ok else viol)
        radii = np.unique(np.linalg.norm(plan.y, axis=1))
        radii = radii[radii > 0]
        gaps = []
        for R in radii:
            tp = truncate_plan(plan, R)
            trunc_bad += int(not is_cyclically_monotone((tp.x, tp.y))[0])
            gaps.append(w_mu_sq(velocity_of_plan(tp), xi))
            rows.append((t, float(R), gaps[-1]))
        if len(gaps) > 1:
            gap_increase = max(gap_increase, float(np.max(np.diff(gaps))))
    rep.add("extension monotonicity violation", ext_worst, 0.0, "==")
    rep.add("non-monotone truncations", trunc_bad, 0, "==")
    rep.add("largest increase of squared gap between breakpoints", gap_increase, ctx.tol("gap", 1e-12))
    rep.tables["truncation"] = _table(["instance", "R", "w_mu_sq"], rows)
    return rep


def suite_blowup(ctx: SuiteContext) -> SuiteReport:
    """Blow-ups of the parabola concentrate in a tube around the tangent line."""
    rep = SuiteReport("blowup")
    par = fx.parabola(int(ctx.param("n", 4010)))
    t0 = float(ctx.param("t", 0.3))
    x = par.chart.evaluate([t0])
    h = [2.0**-n for n in range(1, int(ctx.param("levels", 8)) + 1)]
    res = blowup_sequence(par.mu, x, h, float(ctx.param("R", 1.0)))
    P = np.array([[1.0, 2 * t0]]) / math.hypot(1.0, 2 * t0)
    eps = float(ctx.param("eps", 0.05))
    curve = res.concentration(P, eps)
    rep.add("largest increase of tube mass", float(np.max(np.diff(curve), initial=0.0)), ctx.tol("monotone", 0.0))
    rep.add("tube mass at the finest scale", float(curve[-1]), ctx.tol("final", 1e-2))
    rep.tables["concentration"] = res.curve_csv(P, eps)
    return rep


def suite_closedness(ctx: SuiteContext) -> SuiteReport:
    """Limits of on-graph sequences stay on the graph; weak escape lands in the solenoidal part."""
    rep = SuiteReport("closedness")
    seg = fx.segment(int(ctx.param("n", 40)))
    D = GrassmannSection.constant(seg.mu, [[0.0, 1.0]])
    seq = fx.converging_gamma_sequence(seg.mu, [0.0, 1.0])
    r = closedness_regression(seq, D)
    rep.add("gamma sequence: limit defect - max defect", r.limit_defect - max(r.defects), ctx.tol("closed", 1e-8))
    par = fx.parabola(int(ctx.param("n_curve", 41)))
    normals = np.array([[-2 * x[0], 1.0] for x in par.mu.points])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    Dn = GrassmannSection(par.mu, tuple(v[None, :] for v in normals))
    seq2 = [gamma_of((1 + 2.0**-j) * normals, par.mu) for j in range(6)] + [gamma_of(normals, par.mu)]
    r2 = closedness_regression(seq2, Dn)
    rep.add("normal sequence: limit defect - max defect", r2.limit_defect - max(r2.defects), ctx.tol("closed", 1e-8))
    esc = fx.weak_escape_sequence()
    r3 = closedness_regression(esc, lambda base: GrassmannSection.constant(base, [[1.0]]))
    rep.add("weak escape labeled solenoidal-not-tangent", float(r3.label == "solenoidal-not-tangent"), 1.0, "==")
    rep.tables["weak_escape"] = _table(["step", "gap"], [(j, g) for j, g in enumerate(r3.gaps)])
    return rep


SUITES: dict[str, Callable[[SuiteContext], SuiteReport]] = {
    "exact-ot": suite_exact_ot,
    "scalar-product": suite_scalar_product,
    "gamma-orthogonality": suite_gamma_orthogonality,
    "projection": suite_projection,
    "doubling": suite_doubling,
    "chebyshev": suite_chebyshev,
    "segment": suite_segment,
    "square-solenoidal": suite_square,
    "decomp": suite_decomposition,
    "maxmin": suite_maxmin,
    "appendix": suite_appendix,
    "blowup": suite_blowup,
    "closedness": suite_closedness,
}


def run_suite(name: str, ctx: SuiteContext | None = None) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](ctx or SuiteContext())
