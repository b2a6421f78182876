import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from continuity_lab.cohomology import SurfaceParams, class_at
from continuity_lab.curvature import ricci_coefficients
from continuity_lab.profile import Grid, NonAdmissibleProfile, RadialProfile, reference_profile
from continuity_lab.solver import (ContinuationStall, SolverConfig, continuation, first_identity_residual,
                                   geometric_schedule, jacobian, log_gap_schedule, newton_step,
                                   normalize_profile, residual, second_identity_residual)

from conftest import CASE_I, smooth_psi, solve_at

DATA = Path(__file__).parent / "data"
P1 = SurfaceParams(3, 1, 2, 3)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_zero_time_residual_vanishes(n):
    g = Grid(257, 1)
    u0 = RadialProfile(g, 2.0, 3.0, 0.01 * smooth_psi(g.sigma))
    res = residual(u0, u0, 0.0, n)
    assert res.norm_inf == 0.0


def test_constant_pins_the_middle():
    g = Grid(257, 1)
    u0 = reference_profile(2, 3, 1, g)
    cls = class_at(P1, 0.1)
    u = reference_profile(float(cls.a), float(cls.b), 1, g)
    res = residual(u, u0, 0.1, 3)
    assert res.F[g.mid] == 0.0
    assert res.norm_inf > 1e-3
    assert res.norm_inf == np.max(np.abs(res.F))


def test_residual_rejects_non_admissible():
    g = Grid(129, 1)
    u0 = reference_profile(2, 3, 1, g)
    bad = RadialProfile(g, 2.0, 3.0, -40.0 * (g.sigma - 0.5) ** 2)
    with pytest.raises(NonAdmissibleProfile):
        residual(bad, u0, 0.1, 3)


@pytest.mark.parametrize("idx", [0, 1])
def test_chebyshev_oracle_solution_has_small_residual(idx):
    doc = json.loads((DATA / "chebyshev_case_i.json").read_text())
    sol = doc["solutions"][idx]
    g = Grid(2049, 1)
    psi = C.chebval(2 * g.sigma - 1, np.array(sol["coef"]))
    u = RadialProfile(g, sol["a"], sol["b"], psi)
    u0 = reference_profile(2, 3, 1, g)
    res = residual(u, u0, sol["t"], 3)
    assert res.norm_inf < 1e-8
    assert res.c == pytest.approx(sol["c"], abs=1e-10)


def test_newton_matches_chebyshev_oracle():
    doc = json.loads((DATA / "chebyshev_case_i.json").read_text())
    for sol in doc["solutions"]:
        u, _, info = solve_at(P1, sol["t"], 1025)
        want = C.chebval(2 * u.grid.sigma - 1, np.array(sol["coef"]))
        assert np.max(np.abs(u.psi - want)) < 1e-10
        assert info.c == pytest.approx(sol["c"], abs=1e-10)


def _fd_check(N, t, seed):
    rng = np.random.default_rng(seed)
    g = Grid(N, 1)
    u0 = reference_profile(2, 3, 1, g)
    cls = class_at(P1, t)
    u = RadialProfile(g, float(cls.a), float(cls.b), 0.02 * smooth_psi(g.sigma))
    coeffs = tuple(rng.uniform(-1, 1, 3))
    d = smooth_psi(g.sigma, coeffs)
    J = jacobian(u, t, 3)
    eps = 1e-6
    Fp = residual(u.with_psi(u.psi + eps * d), u0, t, 3, c=0.0).F
    Fm = residual(u.with_psi(u.psi - eps * d), u0, t, 3, c=0.0).F
    fd = (Fp - Fm) / (2 * eps)
    lin = J @ d
    return np.max(np.abs(fd - lin)) / np.max(np.abs(lin))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0.01, 0.45))
def test_jacobian_matches_finite_differences(seed, t):
    assert _fd_check(257, t, seed) < 1e-6


def test_zero_perturbation_zero_change():
    g = Grid(129, 1)
    u = reference_profile(2, 3, 1, g)
    assert np.all(jacobian(u, 0.2, 3) @ np.zeros(g.N) == 0.0)


def test_quadratic_convergence():
    u, _, info = solve_at(P1, 0.1, 1025)
    h = info.history
    assert h[-1] <= 1e-10
    ratios = [h[i + 1] / h[i] ** 2 for i in range(len(h) - 1) if h[i] > 1e-6]
    assert ratios and max(ratios) < 10.0


def test_newton_step_reports_decrease():
    g = Grid(257, 1)
    u0 = reference_profile(2, 3, 1, g)
    cls = class_at(P1, 0.2)
    u = reference_profile(float(cls.a), float(cls.b), 1, g)
    new, res, diag = newton_step(u, u0, 0.2, 3, SolverConfig())
    assert diag.residual_after < diag.residual_before
    assert res.norm_inf == diag.residual_after
    assert new.psi[g.mid] == pytest.approx(0.0, abs=1e-14)


def test_schedules():
    g = geometric_schedule(0.5, 4)
    assert g == [0.25, 0.375, 0.4375, 0.46875]
    lg = log_gap_schedule(1.0, 0.5, 1e-3, 10)
    gaps = 1 - np.array(lg)
    assert gaps[0] == pytest.approx(0.5) and gaps[-1] == pytest.approx(1e-3)
    assert np.all(np.diff(lg) > 0)
    with pytest.raises(ValueError):
        SolverConfig(schedule=[0.2, 0.1]).resolve(0.5)
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=0.0)


def test_reference_continuation(run_case_i):
    ts = [e.t for e in run_case_i.emitted]
    assert np.all(np.diff(ts) > 0)
    assert max(e.info.iterations for e in run_case_i.emitted) <= 8
    assert max(e.info.residual for e in run_case_i.emitted) <= 1e-10


def test_case_iii_profiles_stay_admissible(run_case_iii):
    assert run_case_iii.complete
    for e in run_case_iii.emitted:
        assert np.all(e.profile.p > 0) and np.all(e.profile.q > 0)


def test_continuity_at_zero():
    g = Grid(513, 1)
    u0 = reference_profile(2, 3, 1, g)
    devs = []
    for t in (1e-2, 1e-3, 1e-4):
        u = continuation(u0, P1, SolverConfig(schedule=[t]))[-1].profile
        devs.append(np.max(np.abs(u.psi - u0.psi)) + abs(u.a - u0.a) + abs(u.b - u0.b))
    assert devs[0] > devs[1] > devs[2] and devs[2] < 1e-3


def test_stall_reports_partial_progress():
    g = Grid(129, 1)
    u0 = reference_profile(2, 3, 1, g)
    with pytest.raises(ContinuationStall) as err:
        continuation(u0, P1, SolverConfig(schedule=[0.1, 0.2, 0.3], max_newton_iters=1, min_gap=1e-3))
    assert all(e.t < 0.3 for e in err.value.emitted)


def test_min_gap_trims_schedule():
    cfg = SolverConfig(schedule=[0.1, 0.2, 0.3], min_gap=0.25)
    assert cfg.resolve(0.5)[0] == [0.1, 0.2]


def test_normalize_case_ii_slopes(run_case_ii):
    T = float(run_case_ii.report.T)
    n, k = 2, 1
    for e in run_case_ii.emitted:
        v = normalize_profile(e.profile, e.t, T)
        assert v.a == pytest.approx(n - k, rel=1e-12) and v.b == pytest.approx(n + k, rel=1e-12)


def test_normalize_identities():
    g = Grid(129, 1)
    u = RadialProfile(g, 2.0, 3.0, 0.01 * smooth_psi(g.sigma))
    v = normalize_profile(u, 0.0, 0.5)
    assert v.a == 4.0 and v.b == 6.0 and np.array_equal(v.psi, 2.0 * u.psi)
    back = v.scaled(0.5)
    assert back.a == u.a and back.b == u.b and np.array_equal(back.psi, u.psi)
    with pytest.raises(ValueError):
        normalize_profile(u, 0.5, 0.5)


@pytest.mark.parametrize("case", ["I", "II"])
def test_first_identity(reference_runs, case):
    run = reference_runs[case]
    n = run.params.n
    worst = max(np.max(np.abs(first_identity_residual(e.profile, run.u0, e.t, n))) for e in run.emitted)
    assert worst < 1e-6


def test_second_identity_is_loose_but_small(run_case_i):
    n = run_case_i.params.n
    worst = max(np.max(np.abs(second_identity_residual(e.profile, run_case_i.u0, e.t, n)))
                for e in run_case_i.emitted)
    assert worst < 1e-4


def test_ricci_consistency(run_case_i):
    # v' = (u0' - u')/t and v'' = (u0'' - u'')/t, with v differentiated numerically
    u0, n = run_case_i.u0, run_case_i.params.n
    for e in run_case_i.emitted[::5]:
        u, t = e.profile, e.t
        vp, vpp = ricci_coefficients(u, n)
        assert np.max(np.abs(vp - (u0.p - u.p) / t)) < 1e-6
        g = u.grid
        interior = slice(2, -2)
        v = n * g.rho[interior] - (n - 1) * np.log(u.p[interior]) - np.log(g.s[interior] * u.q[interior])
        dv = np.gradient(v, g.rho[interior])
        expect = ((u0.p - u.p) / t)[interior]
        core = np.abs(g.rho[interior]) < 3
        assert np.max(np.abs(dv - expect)[core]) < 1e-4
        upp, upp0 = g.s * u.q, g.s * u0.q
        assert np.max(np.abs(vpp - (upp0 - upp) / t)) < 1e-5


def test_grid_refinement():
    # coarse grids, so that truncation rather than rounding dominates
    sols = {N: solve_at(P1, 0.25, N)[0] for N in (65, 129, 257)}
    d1 = np.max(np.abs(sols[65].psi - sols[129].psi[::2]))
    d2 = np.max(np.abs(sols[129].psi - sols[257].psi[::2]))
    assert math.log2(d1 / d2) >= 3.5


def test_custom_initial_profile(tmp_path):
    from continuity_lab import io
    from continuity_lab.runner import RunConfig, execute
    g = Grid(1025, 1)
    u0 = RadialProfile(g, 2.0, 3.0, 0.02 * smooth_psi(g.sigma))
    path = tmp_path / "u0.bin"
    io.save_binary(path, u0, 3)
    run = execute(RunConfig(N=1025, initial_profile=str(path), **CASE_I))
    assert run.complete and np.array_equal(run.u0.psi, u0.psi)
    worst = max(np.max(np.abs(first_identity_residual(e.profile, run.u0, e.t, 3))) for e in run.emitted)
    assert worst < 1e-6
    assert 0.85 <= run.verdict.fits["sup_rm"].exponent <= 1.15
    with pytest.raises(ValueError):
        execute(RunConfig(N=513, initial_profile=str(path), **CASE_I))
