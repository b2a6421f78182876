import numpy as np
import pytest

from continuity_lab import Grid, RadialProfile, SurfaceParams, class_at, reference_profile
from continuity_lab.runner import RunConfig, execute
from continuity_lab.solver import SolverConfig, solve

CASE_I = dict(n=3, k=1, a0=2, b0=3)
CASE_II = dict(n=2, k=1, a0=1, case_ii=True)
CASE_III = dict(n=2, k=1, a0=1, b0=4)


@pytest.fixture(scope="session")
def run_case_i():
    return execute(RunConfig(**CASE_I))


@pytest.fixture(scope="session")
def run_case_ii():
    return execute(RunConfig(**CASE_II))


@pytest.fixture(scope="session")
def run_case_iii():
    return execute(RunConfig(**CASE_III))


@pytest.fixture(scope="session")
def reference_runs(run_case_i, run_case_ii, run_case_iii):
    return {"I": run_case_i, "II": run_case_ii, "III": run_case_iii}


def solve_at(params: SurfaceParams, t: float, N: int, u0: RadialProfile | None = None):
    """Single Newton solve from u_hat_t (no continuation)."""
    grid = Grid(N, params.k)
    if u0 is None:
        u0 = reference_profile(float(params.a0), float(params.b0), params.k, grid)
    cls = class_at(params, t)
    start = RadialProfile(grid, float(cls.a), float(cls.b), np.zeros(N))
    sol, info = solve(start, u0, t, params.n, SolverConfig())
    return sol, u0, info


def smooth_psi(sigma, coeffs=(0.05, -0.03, 0.02)):
    """Smooth test perturbation vanishing at sigma = 1/2."""
    x = 2.0 * np.asarray(sigma) - 1.0
    out = np.zeros_like(x)
    for j, c in enumerate(coeffs, start=1):
        out = out + c * np.sin(j * np.pi * x) + 0.5 * c * (np.cos(j * np.pi * x) - 1.0)
    return out
