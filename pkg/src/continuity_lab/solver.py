"""Newton continuation for the radial continuity equation.

The metric equation omega(t) = omega_0 - t Ric(omega(t)) becomes, for the
Calabi potential,

    u_t = u_0 + t(n-1) log u_t' + t log u_t'' - t n rho + c_t,

with c_t fixed by u_t(0) = 0.  Writing u = u_hat_t + psi and u'' = s q, all
log sigma and log(1 - sigma) pieces cancel between u - u_0, log u'' and n rho,
leaving the bounded residual

    F = psi - psi_0 + (kappa_t - kappa_0) - t(n-1) log p - t log(k q) - c

on the closed sigma interval (kappa is the normalising constant of u_hat).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cohomology import SurfaceParams, class_at, classify
from .profile import NonAdmissibleProfile, RadialProfile, reference_constant

log = logging.getLogger(__name__)


class LinearSolveFailure(RuntimeError):
    pass


class LineSearchFailure(RuntimeError):
    pass


class ContinuationStall(RuntimeError):
    def __init__(self, message, emitted=None):
        super().__init__(message)
        self.emitted = emitted or []


def geometric_schedule(T: float, J: int = 24) -> list[float]:
    """t_j = T(1 - 2^-j), j = 1..J."""
    return [T * (1.0 - 2.0**-j) for j in range(1, J + 1)]


def log_gap_schedule(T: float, gap_max: float = 0.5, gap_min: float = 1e-3,
                     per_decade: int = 10) -> list[float]:
    """Times whose relative gaps (T - t)/T are log-spaced from gap_max to gap_min."""
    decades = math.log10(gap_max / gap_min)
    m = int(round(decades * per_decade))
    gaps = np.logspace(math.log10(gap_max), math.log10(gap_min), m + 1)
    return [float(T * (1.0 - g)) for g in gaps]


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 1.0
    schedule: list[float] | None = None
    J: int = 24
    min_gap: float | None = None  # absolute; defaults to 1e-6 T
    max_substeps: int = 64        # halvings and retries allowed per scheduled time

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_newton_iters < 1:
            raise ValueError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    def resolve(self, T: float) -> tuple[list[float], float]:
        """Validated (schedule, min_gap) for singular time T."""
        min_gap = self.min_gap if self.min_gap is not None else 1e-6 * T
        sched = list(self.schedule) if self.schedule is not None else geometric_schedule(T, self.J)
        sched = [t for t in sched if T - t >= min_gap]
        if any(b <= a for a, b in zip(sched, sched[1:])) or not sched or sched[0] <= 0:
            raise ValueError("schedule must be positive and strictly increasing")
        return sched, min_gap


@dataclass
class Residual:
    F: np.ndarray
    c: float

    @property
    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.F)))


def _check_admissible(u: RadialProfile):
    p, q = u.p, u.q
    bad = np.flatnonzero((p <= 0) | (q <= 0) | ~np.isfinite(p) | ~np.isfinite(q))
    if bad.size:
        raise NonAdmissibleProfile(f"u' or u'' not positive at nodes {bad[:5].tolist()}...")


def _reduced(u: RadialProfile, u0: RadialProfile, t: float, n: int) -> np.ndarray:
    """Residual without the constant c."""
    k = u.k
    shift = reference_constant(u.a, u.b, k) - reference_constant(u0.a, u0.b, k)
    return u.psi - u0.psi + shift - t * (n - 1) * np.log(u.p) - t * np.log(k * u.q)


def closed_form_constant(u: RadialProfile, t: float, n: int) -> float:
    """c_t = -t(n-1) log u'(0) - t log u''(0)."""
    m = u.grid.mid
    upp0 = u.grid.s[m] * u.q[m]
    return -t * (n - 1) * math.log(u.p[m]) - t * math.log(upp0)


def residual(u: RadialProfile, u0: RadialProfile, t: float, n: int,
             c: float | None = None) -> Residual:
    """Residual of the radial equation; c defaults to the value making F(rho=0) = 0."""
    if u.grid != u0.grid:
        raise ValueError("profiles live on different grids")
    _check_admissible(u)
    g = _reduced(u, u0, t, n)
    if c is None:
        c = float(g[u.grid.mid])
    return Residual(g - c, float(c))


def rounding_floor(u: RadialProfile, u0: RadialProfile, t: float, n: int,
                   safety: float = 16.0) -> float:
    """Bound on the max-norm error of evaluating F in floating point.

    The stored psi carries relative error eps; the stencils amplify it by the
    sums of absolute weights, which is what limits how far Newton can push the
    residual on fine or stretched grids.
    """
    g = u.grid
    eps = np.finfo(float).eps
    apsi = np.abs(u.psi)
    e1 = g.abs_diff_matrix(1) @ apsi
    e2 = g.abs_diff_matrix(2) @ apsi
    p, q = u.p, u.q
    err = (apsi + np.abs(u0.psi) + t * (n - 1) * (np.abs(p) + g.s * e1) / p
           + t * (np.abs(q) + np.abs(g.s1) * e1 + g.s * e2) / q)
    return float(safety * eps * np.max(err))


def jacobian(u: RadialProfile, t: float, n: int) -> sp.csr_matrix:
    """d F / d psi (without the c column)."""
    g = u.grid
    p, q = u.p, u.q
    D1, D2 = g.diff_matrix(1), g.diff_matrix(2)
    c1 = t * (n - 1) * g.s / p + t * g.s1 / q
    c2 = t * g.s / q
    return (sp.identity(g.N, format="csr") - sp.diags(c1) @ D1 - sp.diags(c2) @ D2).tocsr()


def _bordered(J: sp.csr_matrix, mid: int) -> sp.csc_matrix:
    N = J.shape[0]
    col = sp.csr_matrix(-np.ones((N, 1)))
    row = sp.csr_matrix(([1.0], ([0], [mid])), shape=(1, N))
    return sp.bmat([[J, col], [row, None]], format="csc")


@dataclass
class StepDiagnostics:
    step_norm: float
    residual_before: float
    residual_after: float
    step_length: float


def newton_step(u: RadialProfile, u0: RadialProfile, t: float, n: int,
                config: SolverConfig, c: float | None = None, floor: float = 0.0):
    """One damped Newton update of (psi, c); the line search keeps u', u'' > 0.

    A trial step is taken when it is admissible and lowers the residual, or
    lands below max(newton_tol, floor).
    """
    res = residual(u, u0, t, n, c)
    mid = u.grid.mid
    A = _bordered(jacobian(u, t, n), mid)
    rhs = np.concatenate([-res.F, [-u.psi[mid]]])
    try:
        with np.errstate(all="raise"):
            delta = spla.spsolve(A, rhs)
    except (RuntimeError, FloatingPointError) as exc:
        raise LinearSolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(delta)):
        raise LinearSolveFailure("non-finite Newton update")
    dpsi, dc = delta[:-1], delta[-1]
    lam = config.damping
    target = max(config.newton_tol, floor)
    lam_min = 2.0**-20 * config.damping
    while lam >= lam_min:
        trial = u.with_psi(u.psi + lam * dpsi)
        try:
            new = residual(trial, u0, t, n, res.c + lam * dc)
        except NonAdmissibleProfile:
            lam *= 0.5
            continue
        if new.norm_inf < res.norm_inf or new.norm_inf <= target:
            return trial, new, StepDiagnostics(float(np.max(np.abs(lam * dpsi))),
                                               res.norm_inf, new.norm_inf, lam)
        lam *= 0.5
    raise LineSearchFailure(f"no admissible decreasing step down to {lam_min:g}")


@dataclass
class SolveInfo:
    t: float
    iterations: int
    residual: float
    c: float
    history: list[float] = field(default_factory=list)
    floor: float = 0.0
    floor_limited: bool = False


def solve(u_start: RadialProfile, u0: RadialProfile, t: float, n: int,
          config: SolverConfig) -> tuple[RadialProfile, SolveInfo]:
    """Newton iteration from u_start (whose a, b must already be a_t, b_t).

    Stops at newton_tol, or once the residual is below the rounding floor of
    its own evaluation and no longer contracting (flagged in the info).
    """
    u = u_start
    if abs(u.psi[u.grid.mid]) > 0:
        u = u.with_psi(u.psi - u.psi[u.grid.mid])
    res = residual(u, u0, t, n)
    c = res.c
    history = [res.norm_inf]
    floor = rounding_floor(u, u0, t, n)
    it = 0
    limited = False
    while res.norm_inf > config.newton_tol:
        if it >= config.max_newton_iters:
            raise LineSearchFailure(
                f"Newton did not converge in {it} iterations (residual {res.norm_inf:.3e})")
        before = res.norm_inf
        u, res, _ = newton_step(u, u0, t, n, config, c, floor)
        c = res.c
        history.append(res.norm_inf)
        floor = rounding_floor(u, u0, t, n)
        it += 1
        if res.norm_inf <= floor and res.norm_inf > 0.25 * before:
            limited = res.norm_inf > config.newton_tol
            break
    return u, SolveInfo(float(t), it, res.norm_inf, c, history, floor, limited)


@dataclass
class Emitted:
    t: float
    profile: RadialProfile
    info: SolveInfo
    substeps: int


def continuation(u0: RadialProfile, params: SurfaceParams, config: SolverConfig,
                 callback=None) -> list[Emitted]:
    """Solve at every scheduled time, warm-starting from the previous psi.

    A failed Newton solve halves the time increment (intermediate solutions are
    used as warm starts but not emitted) until it underflows min_gap or a
    scheduled time needs more than max_substeps attempts.
    """
    report = classify(params)
    T = float(report.T)
    n = params.n
    sched, min_gap = config.resolve(T)
    if abs(u0.a - float(params.a0)) > 1e-14 * u0.b or abs(u0.b - float(params.b0)) > 1e-14 * u0.b:
        raise ValueError("u0 boundary slopes differ from (a0, b0)")
    _check_admissible(u0)

    emitted: list[Emitted] = []
    t_prev, psi_prev = 0.0, u0.psi
    for target in sched:
        t_try = target
        substeps = 0
        while True:
            cls = class_at(params, t_try)
            start = RadialProfile(u0.grid, float(cls.a), float(cls.b), psi_prev)
            try:
                sol, info = solve(start, u0, t_try, n, config)
            except (LinearSolveFailure, LineSearchFailure, NonAdmissibleProfile) as exc:
                inc = 0.5 * (t_try - t_prev)
                log.debug("t=%.6g failed (%s); halving increment to %.3g", t_try, exc, inc)
                if inc < min_gap:
                    raise ContinuationStall(
                        f"increment underflow at t={t_prev:.12g} toward {target:.12g}",
                        emitted) from exc
                t_try = t_prev + inc
                substeps += 1
                if substeps > config.max_substeps:
                    raise ContinuationStall(
                        f"more than {config.max_substeps} substeps toward t={target:.12g}",
                        emitted) from exc
                continue
            t_prev, psi_prev = t_try, sol.psi
            if t_try == target:
                break
            t_try = target
        item = Emitted(float(target), sol, info, substeps)
        emitted.append(item)
        if callback is not None:
            callback(item)
    return emitted


def normalize_profile(u: RadialProfile, t: float, T: float) -> RadialProfile:
    """Potential of omega/(T - t)."""
    if not t < T:
        raise ValueError("normalisation needs t < T")
    return u.scaled(1.0 / (T - t))


def first_identity_residual(u: RadialProfile, u0: RadialProfile, t: float, n: int) -> np.ndarray:
    """u' - u0' - t(n-1)u''/u' - t u'''/u'' + t n at every node.

    The rho-derivative of the equation; the solver never evaluates it, so a
    small value is independent evidence that u solves the undifferentiated
    problem.  Written through p, q so the ratios stay finite at the divisors.
    """
    g = u.grid
    p, q, q1, _ = u.moments
    return (p - u0.p - t * (n - 1) * g.s * q / p - t * (g.s1 + g.s * q1 / q) + t * n)


def second_identity_residual(u: RadialProfile, u0: RadialProfile, t: float, n: int) -> np.ndarray:
    """rho-derivative of the first identity, divided through by s = k sigma(1 - sigma).

    Involves the fourth derivative, so it is a looser diagnostic than the first.
    """
    g = u.grid
    s, s1, s2 = g.s, g.s1, g.s2
    p, q, q1, q2 = u.moments
    r = q1 / q
    return (q - u0.q - t * (n - 1) * ((s1 * q + s * q1) / p - s * q * q / p**2)
            - t * (s2 + s1 * r + s * q2 / q - s * r * r))
