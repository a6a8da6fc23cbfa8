import math
import random
import threading

import numpy as np
import pytest
import sympy as sp
from gmpy2 import mpq
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nilmap import PolyMap, Polynomial
from nilmap.dynamics import (
    CONVERGED,
    DIVERGED,
    MAX_TIME,
    CompiledMap,
    EigenConvergenceError,
    IntegrationCancelled,
    IntegratorConfig,
    ScanConfig,
    StepSizeUnderflow,
    attractor_experiment,
    density_scan,
    divergence_numerator,
    eigenvalues,
    exponential_solution_residual,
    fixed_step_solve,
    hessenberg,
    hurwitz_scan,
    integrability_check,
    integrate,
    integrate_ensemble,
    jacobian_at,
    plane_rotation_check,
    restrict_to_plane,
    sample_points,
)
from nilmap.families import Density, HurwitzFieldSpec, build_density, build_hurwitz_F, cegmh_field

from conftest import from_sympy, symbols, to_sympy


def spec3(a="1/2"):
    return HurwitzFieldSpec.simple(2, -1, -1, [a], [1])


F3 = build_hurwitz_F(spec3())


# -- evaluation --------------------------------------------------------------


def test_jacobian_at_examples():
    assert np.array_equal(jacobian_at(PolyMap.identity(3), [0.3, -1.0, 2.0]), np.eye(3))
    assert np.array_equal(jacobian_at(cegmh_field(), [0, 0, 0]), -np.eye(3))
    J = jacobian_at(F3, [0.4, -1.3, 0.0])
    assert np.array_equal(J, [[0, -1, 0], [1, 0, 0], [0, 0, 0]])


def test_compiled_field_matches_eval_float():
    rng = np.random.default_rng(0)
    cm = CompiledMap(cegmh_field())
    X = rng.uniform(-2, 2, (20, 3))
    vals = cm(X)
    for x, v in zip(X, vals):
        assert np.allclose(v, cegmh_field().eval_float(list(x)), rtol=1e-13, atol=1e-13)


def test_jacobian_matches_finite_differences():
    rng = random.Random(1)
    for F in (F3, build_hurwitz_F(HurwitzFieldSpec.simple(4, -1, -1, ["1/2", "1/3"], [1, 2])), cegmh_field()):
        cm = CompiledMap(F)
        n = F.nvars
        for _ in range(100 // 3 + 1):
            pt = [float(mpq(rng.randint(-20, 20), rng.randint(1, 10))) for _ in range(n)]
            J = cm.jacobian(np.array([pt]))[0]
            for j in range(n):
                h = 1e-6 * (1 + abs(pt[j]))
                up, dn = list(pt), list(pt)
                up[j] += h
                dn[j] -= h
                col = (np.array(F.eval_float(up)) - np.array(F.eval_float(dn))) / (2 * h)
                assert np.allclose(J[:, j], col, rtol=1e-5, atol=1e-5)


# -- eigenvalues ----------------------------------------------------------------


def test_eigen_simple_cases():
    assert sorted(ev.real for ev in eigenvalues([[-1, 0], [0, -2]])) == [-2, -1]
    ev = sorted(eigenvalues([[0, -1], [1, 0]]), key=lambda z: z.imag)
    assert abs(ev[0] + 1j) < 1e-15 and abs(ev[1] - 1j) < 1e-15
    assert eigenvalues([[5.0]]) == [5.0]


def test_eigen_hurwitz_formulas():
    # beta_{n+1} = -(R + x3 R') = -3 at x3 = 1; the pair sums to 2 lam R = -2
    for pt in ([0.0, 0.0, 1.0], [0.3, -0.7, 1.0], [1.5, 1.1, 1.0]):
        ev = eigenvalues(jacobian_at(F3, pt))
        last = min(ev, key=lambda z: abs(z + 3))
        assert abs(last + 3) < 1e-12
        rest = [z for z in ev if z is not last]
        assert abs(sum(rest) + 2) < 1e-12
        assert all(abs(z.real + 1) < 1e-12 for z in rest if abs(z.imag) > 1e-9)


def test_eigen_input_checks():
    with pytest.raises(ValueError):
        eigenvalues([[1, 2, 3], [4, 5, 6]])
    with pytest.raises(ValueError):
        eigenvalues([[1, math.nan], [0, 1]])
    with pytest.raises(EigenConvergenceError):
        eigenvalues(np.random.default_rng(2).normal(size=(6, 6)), max_sweeps=1)


def test_hessenberg_form_and_similarity():
    A = np.random.default_rng(3).normal(size=(6, 6))
    H = np.array(hessenberg(A.tolist()))
    assert np.allclose(np.tril(H, -2), 0)
    assert np.isclose(np.trace(H), np.trace(A))
    assert np.allclose(np.sort_complex(np.linalg.eigvals(H)), np.sort_complex(np.linalg.eigvals(A)))


@given(arrays(float, st.tuples(st.integers(1, 8), st.just(1)).map(lambda s: (s[0], s[0])),
              elements=st.floats(-10, 10, allow_nan=False)))
def test_eigen_residual(M):
    ev = eigenvalues(M)
    assert len(ev) == M.shape[0]
    norm = max(np.linalg.norm(M, 2), 1e-300)
    for lam in ev:
        smin = np.linalg.svd(M - lam * np.eye(len(M)), compute_uv=False)[-1]
        assert smin / norm <= 1e-8 or smin <= 1e-12


# -- scans -------------------------------------------------------------------------


def test_scan_config_validation():
    with pytest.raises(ValueError):
        ScanConfig(0)
    with pytest.raises(ValueError):
        ScanConfig(10, box_halfwidth=0)
    with pytest.raises(ValueError):
        ScanConfig(10, plane_exclusion=-1)


def test_sampling_is_counter_based():
    cfg = ScanConfig(50, rng_seed=9)
    full, _ = sample_points(3, cfg)
    tail, _ = sample_points(3, cfg, start=20, count=30)
    assert np.array_equal(full[20:], tail)
    pts, _ = sample_points(3, ScanConfig(200, plane_exclusion=0.5))
    assert np.all(np.abs(pts[:, -1]) >= 0.5)


def test_hurwitz_scan_3d():
    rep = hurwitz_scan(F3, ScanConfig(500))
    assert rep.passed and not rep.violations
    assert rep.max_real_part_off_plane < 0
    assert rep.max_abs_real_part_on_plane <= 1e-9
    assert rep.num_on_plane == 500
    again = hurwitz_scan(F3, ScanConfig(500))
    assert again.to_json() == rep.to_json()


def test_hurwitz_scan_reports_violations():
    # a field that is not Hurwitz off the plane: flip the contraction sign
    bad = PolyMap([F3[0], F3[1], -F3[2]])
    rep = hurwitz_scan(bad, ScanConfig(50))
    assert rep.violations and not rep.passed


def test_cegmh_everywhere_hurwitz():
    # a triple eigenvalue spreads by ~eps^(1/3) under rounding
    rep = hurwitz_scan(cegmh_field(), ScanConfig(300), plane=False)
    assert rep.passed
    pts, _ = sample_points(3, ScanConfig(300))
    cm = CompiledMap(cegmh_field())
    worst = max(abs(z.real + 1) for J in cm.jacobian(pts) for z in eigenvalues(J))
    assert worst < 1e-3


def test_divergence_numerator_zero_field():
    rho = Density(Polynomial.parse("x1^2 + x2^2 + x3^2", 3), 3)
    assert divergence_numerator(PolyMap([Polynomial.zero(3)] * 3), rho).is_zero()


def test_divergence_numerator_against_sympy():
    alpha = mpq(4)
    rho = build_density(spec3(), alpha)
    S = divergence_numerator(F3, rho)
    xs = symbols(3)
    Fs = [to_sympy(p) for p in F3]
    P = to_sympy(rho.P)
    expect = P * sum(sp.diff(f, x) for f, x in zip(Fs, xs)) - 4 * sum(sp.diff(P, x) * f for f, x in zip(Fs, xs))
    assert S == from_sympy(expect, 3)
    assert restrict_to_plane(S).is_zero()
    # bracket pattern (-2 alpha (lam -+ a^2 A1) + n lam - 1 - 2l) d_2l for x_j^2 x3^2
    lam, A1, a2 = -1, -1, mpq(1, 4)
    assert S.coeff((2, 0, 2)) == -2 * alpha * (lam + a2 * A1) + 2 * lam - 1 - 2
    assert S.coeff((0, 2, 2)) == -2 * alpha * (lam - a2 * A1) + 2 * lam - 1 - 2


def test_density_scan_cases():
    S = divergence_numerator(F3, build_density(spec3(), mpq(10, 3) + mpq(1, 10)))
    assert density_scan(S, ScanConfig(2000)).passed
    zero = density_scan(Polynomial.zero(3), ScanConfig(20))
    assert not zero.on_plane_violations and len(zero.violations) == 20
    low = density_scan(divergence_numerator(F3, build_density(spec3(), 2, check_bound=False)), ScanConfig(200))
    assert low.violations
    assert low.to_json()["passed"] is False


def test_integrability():
    P = Polynomial.parse("x1^2 + x2^2", 2)
    assert integrability_check(Density(P, mpq(10, 3)))
    assert not integrability_check(Density(P, 2))
    assert integrability_check(Density(P, mpq(5, 2)))


def test_plane_invariance_and_energy():
    for F in (F3, build_hurwitz_F(HurwitzFieldSpec.simple(4, -2, -1, ["1/2", 1], [1, 3], signs=[1, -1]))):
        m = F.nvars
        assert F[m - 1].restrict(m - 1, 0).is_zero()
        energy = sum((Polynomial.var(i, m) * F[i] for i in range(m - 1)), Polynomial.zero(m))
        assert energy.restrict(m - 1, 0).is_zero()


# -- integration ----------------------------------------------------------------


def test_linear_decay():
    tr = integrate(PolyMap.identity(3).scale(-1), [1, 0, 0], t_max=1.0)
    assert tr.terminated == MAX_TIME
    assert tr.t_final == 1.0
    assert abs(tr.final_norm - math.exp(-1)) <= 1e-7 * math.exp(-1)
    assert all(b > a for a, b in zip(tr.times, tr.times[1:]))


def test_converged_status():
    tr = integrate(PolyMap.identity(2).scale(-1), [1, 1])
    assert tr.terminated == CONVERGED and tr.final_norm < 1e-6


def test_cegmh_exponential_solution():
    tr = integrate(cegmh_field(), [18, -12, 1], t_max=500)
    assert tr.terminated == DIVERGED
    for t, x in zip(tr.times, tr.states):
        if t > 5:
            break
        exact = np.array([18 * math.exp(t), -12 * math.exp(2 * t), math.exp(-t)])
        assert np.all(np.abs(np.array(x) - exact) <= 1e-5 * np.abs(exact))


def test_on_plane_rotation():
    tr = integrate(F3, [1, 0, 0], t_max=100)
    X = np.array(tr.states)
    assert tr.terminated == MAX_TIME
    assert np.all(X[:, 2] == 0)
    assert np.max(np.abs(np.linalg.norm(X, axis=1) - 1)) <= 1e-6


def test_ensemble_matches_single():
    starts = [[1.0, 0.5, 0.2], [-0.3, 0.1, 1.0]]
    both = integrate_ensemble(F3, starts, IntegratorConfig(t_max=5))
    for x0, tr in zip(starts, both):
        one = integrate(F3, x0, t_max=5)
        # batched arithmetic may round differently, but the path must agree closely
        assert len(one.times) == len(tr.times)
        assert np.allclose(one.times, tr.times, rtol=1e-9)
        assert np.allclose(one.states, tr.states, rtol=1e-9, atol=1e-9)


def test_integrator_order():
    F = PolyMap.identity(1).scale(-1)
    errs = [abs(fixed_step_solve(F, [1.0], 2.0, n)[0] - math.exp(-2)) for n in (10, 20, 40)]
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(r >= 4 for r in rates)
    tight = abs(integrate(F, [1.0], 2.0, 1e-10, 1e-10).final_state[0] - math.exp(-2))
    loose = abs(integrate(F, [1.0], 2.0, 1e-6, 1e-6).final_state[0] - math.exp(-2))
    assert tight < loose


def test_integrator_errors():
    with pytest.raises(ValueError):
        integrate(F3, [math.inf, 0, 0])
    with pytest.raises(ValueError):
        integrate(F3, [1, 0, 0], atol=0)
    blowup = PolyMap([Polynomial.parse("x1^2", 1)])
    with pytest.raises(StepSizeUnderflow):
        integrate(blowup, [1.0], t_max=2.0, diverge_norm=math.inf)
    ev = threading.Event()
    ev.set()
    with pytest.raises(IntegrationCancelled):
        integrate_ensemble(F3, [[1, 1, 1]], cancel=ev)


def test_trajectory_csv():
    tr = integrate(PolyMap.identity(2).scale(-1), [1, 2], t_max=0.1)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x1,x2"
    first = lines[1].split(",")
    assert first == ["0.0", "1.0", "2.0"]
    last = [float(v) for v in lines[-1].split(",")]
    assert last == [tr.t_final] + tr.final_state


# -- experiments --------------------------------------------------------------------


def test_attractor_empty():
    s = attractor_experiment(F3, 0)
    assert s.num_traj == 0 and s.starts == [] and s.fraction_converged is None and s.rotation == []


def test_attractor_small_run_is_deterministic():
    a = attractor_experiment(F3, 4, ScanConfig(1), t_max=5)
    b = attractor_experiment(F3, 4, ScanConfig(1), t_max=5)
    assert a.to_json() == b.to_json()
    assert all(abs(s[-1]) >= 0.05 for s in a.starts)
    assert all(abs(v) <= 2 for s in a.starts for v in s)
    # norms shrink off the plane
    assert all(fn < np.linalg.norm(s) for fn, s in zip(a.final_norms, a.starts))


def test_plane_rotation_check_5d():
    F = build_hurwitz_F(HurwitzFieldSpec.simple(4, -1, -1, ["1/2", "1/2"], [1]))
    checks = plane_rotation_check(F, t_max=20)
    assert [c.pair for c in checks] == [1, 2]
    assert all(c.passed for c in checks)


def test_exponential_residual():
    F = cegmh_field()
    assert exponential_solution_residual(F, [18, -12, 1], [1, 2, -1]) == [{}, {}, {}]
    res = exponential_solution_residual(F, [18, -12, 2], [1, 2, -1])
    assert any(res)
    # oracle: substitute into sympy with E = exp(t)
    t = sp.Symbol("t")
    xs = symbols(3)
    sol = [18 * sp.exp(t), -12 * sp.exp(2 * t), 2 * sp.exp(-t)]
    for i, Fi in enumerate(F):
        expr = sp.expand(sp.diff(sol[i], t) - to_sympy(Fi).subs(dict(zip(xs, sol))))
        got = sum(sp.Rational(int(v.numerator), int(v.denominator)) * sp.exp(p * t) for p, v in res[i].items())
        assert sp.simplify(expr - got) == 0
