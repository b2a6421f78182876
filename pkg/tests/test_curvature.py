import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from continuity_lab.cohomology import SurfaceParams, class_at
from continuity_lab.curvature import (abc, collapse_diagnostics, curvature_profile, family_weights,
                                      fiber_diameter, raw_derivatives, ricci_lower_margin,
                                      rm_norm_closed, rm_norm_components, scalar_cross_checks,
                                      scalar_rvu)
from continuity_lab.profile import Grid, NonAdmissibleProfile, RadialProfile, reference_profile

from conftest import smooth_psi, solve_at


def _symbolic_scalar_at_zero(n, a, b, k):
    rho = sym.symbols("rho", real=True)
    u = a * rho + sym.Rational(b - a, k) * sym.log(sym.exp(k * rho) + 1)
    u1, u2, u3, u4 = (sym.diff(u, rho, m) for m in range(1, 5))
    R = (-2 * (n - 1) * u3 / (u1 * u2) + n * (n - 1) / u1 - (n - 1) * (n - 2) * u2 / u1**2
         + u3**2 / u2**3 - u4 / u2**2)
    return sym.nsimplify(sym.simplify(R.subs(rho, 0)))


def test_scalar_curvature_of_reference_at_zero():
    want = _symbolic_scalar_at_zero(3, 2, 3, 1)
    assert want == sym.Rational(108, 25)  # 4.32
    g = Grid(1025, 1)
    cs = curvature_profile(reference_profile(2, 3, 1, g), 3)
    assert cs.R[g.mid] == pytest.approx(4.32, rel=1e-12)
    assert cs.tr_chi[g.mid] == pytest.approx(0.8, rel=1e-15)


@pytest.mark.parametrize("n,a,b,k", [(2, 1, 4, 1), (4, 1, 2, 3)])
def test_scalar_curvature_other_references(n, a, b, k):
    want = float(_symbolic_scalar_at_zero(n, a, b, k))
    g = Grid(513, k)
    cs = curvature_profile(reference_profile(a, b, k, g), n)
    assert cs.R[g.mid] == pytest.approx(want, rel=1e-12)


def test_degenerate_dimension_one():
    assert family_weights(1) == (0, 0)
    g = Grid(129, 1)
    u = reference_profile(2, 3, 1, g)
    A, B, C = abc(u)
    assert np.array_equal(rm_norm_closed(A, B, C, 1), np.abs(A))


def _random_profile(seed, N=257):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    g = Grid(N, k)
    a = rng.uniform(0.2, 3.0)
    b = a + rng.uniform(0.2, 3.0)
    amp = rng.uniform(0.0, 0.004) * (b - a)
    u = RadialProfile(g, a, b, amp * smooth_psi(g.sigma, tuple(rng.uniform(-1, 1, 3))))
    return u


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_closed_form_matches_component_sum(seed, n):
    u = _random_profile(seed)
    if np.any(u.p <= 0) or np.any(u.q <= 0):
        return
    A, B, C = abc(u)
    closed = rm_norm_closed(A, B, C, n)[1:-1]
    brute = rm_norm_components(*(d[1:-1] for d in raw_derivatives(u)), n)
    assert np.max(np.abs(closed - brute) / brute) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_norm_dominates_scalar(seed, n):
    u = _random_profile(seed, 129)
    if np.any(u.p <= 0) or np.any(u.q <= 0):
        return
    cs = curvature_profile(u, n, reference_profile(u.a, u.b, u.k, u.grid))
    wb, wc = family_weights(n)
    # Cauchy-Schwarz on R = A + n(n-1) B + 2(n-1) C
    c_n = math.sqrt(1 + (n * (n - 1)) ** 2 / wb + (2 * (n - 1)) ** 2 / wc)
    assert np.all(cs.rm_norm >= 0)
    assert np.all(cs.rm_norm * c_n >= np.abs(cs.R) * (1 - 1e-12))
    assert np.all(cs.tr_chi > 0) and np.all(cs.tr_g0_g > 0)


def test_raw_scalar_formula_agrees_inside():
    u = _random_profile(7, 513)
    g = u.grid
    inner = (g.sigma > 0.05) & (g.sigma < 0.95)
    raw = scalar_rvu(*(d[inner] for d in raw_derivatives(u)), 3)
    assert np.max(np.abs(raw - curvature_profile(u, 3).R[inner])) < 1e-9 * np.max(np.abs(raw))


def test_non_admissible_rejected():
    g = Grid(129, 1)
    bad = RadialProfile(g, 2.0, 3.0, -40.0 * (g.sigma - 0.5) ** 2)
    with pytest.raises(NonAdmissibleProfile):
        curvature_profile(bad, 3)


def test_fiber_diameter_of_reference():
    g = Grid(2049, 1)
    assert fiber_diameter(reference_profile(2, 3, 1, g)) == pytest.approx(math.pi / 2, rel=1e-12)
    for eps in (1e-1, 1e-3, 1e-5):
        d = fiber_diameter(reference_profile(1, 1 + eps, 1, g))
        assert d == pytest.approx(0.5 * math.pi * math.sqrt(eps), rel=1e-12)
    g2 = Grid(513, 2)
    assert fiber_diameter(reference_profile(1, 4, 2, g2)) == pytest.approx(0.5 * math.pi * math.sqrt(1.5), rel=1e-12)


@pytest.mark.parametrize("a,b,k", [(2, 3, 1), (0.1, 5, 2), (1, 1.5, 3)])
def test_sup_h_of_reference(a, b, k):
    f = lambda x: -x * (1 - x) * k * (b - a) / (a + (b - a) * x)
    best = minimize_scalar(f, bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
    assert 0 < best.x < 1
    g = Grid(4097, k)
    got = collapse_diagnostics(reference_profile(a, b, k, g)).sup_H
    assert got == pytest.approx(-best.fun, rel=1e-6)
    assert got <= -best.fun * (1 + 1e-12)


def test_base_scale():
    g = Grid(129, 1)
    assert collapse_diagnostics(reference_profile(2, 3, 1, g)).base_scale == pytest.approx(math.sqrt(2.5))


def test_scalar_routes_on_solved_profile():
    P = SurfaceParams(3, 1, 2, 3)
    u, u0, _ = solve_at(P, 0.25, 2049)
    chk = scalar_cross_checks(u, u0, 0.25, 3)
    assert chk.passed
    assert max(chk.max_rel_12, chk.max_rel_13, chk.max_rel_23) <= 1e-4


def test_scalar_routes_guard_small_t():
    g = Grid(129, 1)
    u0 = reference_profile(2, 3, 1, g)
    with pytest.raises(ValueError):
        scalar_cross_checks(u0, u0, 1e-4, 3, t_min=1e-3 * 0.5)
    with pytest.raises(ValueError):
        scalar_cross_checks(u0, u0, 0.0, 3)


def test_scalar_routes_negative_control():
    # u_hat_t does not solve the equation, so the trace route disagrees
    P = SurfaceParams(3, 1, 2, 3)
    g = Grid(1025, 1)
    u0 = reference_profile(2, 3, 1, g)
    cls = class_at(P, 0.25)
    u = reference_profile(float(cls.a), float(cls.b), 1, g)
    assert not scalar_cross_checks(u, u0, 0.25, 3).passed


@pytest.mark.parametrize("case", ["I", "II"])
def test_ricci_lower_bound(reference_runs, case):
    run = reference_runs[case]
    n = run.params.n
    for e in run.emitted:
        assert ricci_lower_margin(e.profile, e.t, n) >= -1e-6


def test_case_i_trace_bounds(run_case_i):
    n, a0 = run_case_i.params.n, float(run_case_i.params.a0)
    aT = float(run_case_i.report.aT)
    worst_chi, worst_tr = 0.0, []
    for e in run_case_i.emitted:
        cs = curvature_profile(e.profile, n, run_case_i.u0)
        worst_chi = max(worst_chi, float(cs.tr_chi.max()))
        worst_tr.append(float(cs.tr_g0_g.max()))
        a_t = float(class_at(run_case_i.params, e.t).a)
        assert np.all(e.profile.p >= a_t * (1 - 1e-12))
    assert worst_chi <= (n - 1) / min(a0, aT) * (1 + 1e-12)
    assert max(worst_tr) < 10 * worst_tr[0]
