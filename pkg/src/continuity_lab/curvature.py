"""Pointwise geometry of a Calabi-symmetric metric.

At x = (x_1, 0, ..., 0) the metric is e^{-rho} diag(u'', u', ..., u') and
the only non-vanishing bisectional components are

    R_{11 11} = e^{-2rho}(-u'''' + u'''^2/u'')
    R_{kk kk} = 2 e^{-2rho}(u' - u''),             k > 1
    R_{11 kk} = e^{-2rho}(-u''' + u''^2/u'),       k > 1
    R_{kk ll} = e^{-2rho}(u' - u''),               k != l > 1

Normalised by the metric these give three scalars

    A = -u''''/u''^2 + u'''^2/u''^3
    B = 1/u' - u''/u'^2
    C = -u'''/(u' u'') + u''/u'^2

in terms of which |Rm|^2 = A^2 + (n-1)(n+2) B^2 + 2(n-1) C^2 (sum over the
(k, l) families with their multiplicities) and R = A + n(n-1) B + 2(n-1) C.
A is evaluated as (2k - (s q_sigma/q)_sigma)/q so that no 0/0 appears at the
divisors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profile import NonAdmissibleProfile, RadialProfile, derivatives


@dataclass(eq=False)
class CurvatureSample:
    """Struct of arrays over the grid nodes."""
    sigma: np.ndarray
    rho: np.ndarray
    rm_norm: np.ndarray
    R: np.ndarray
    ric_vp: np.ndarray
    ric_vpp: np.ndarray
    tr_chi: np.ndarray
    tr_g0_g: np.ndarray
    tr_w_w0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def family_weights(n: int) -> tuple[int, int]:
    """Multiplicities of B^2 and C^2 in |Rm|^2."""
    return (n - 1) * (n + 2), 2 * (n - 1)


def abc(u: RadialProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = u.grid
    k, s, s1 = g.k, g.s, g.s1
    p, q, q1, q2 = u.moments
    r = q1 / q
    A = (2.0 * k - s1 * r - s * q2 / q + s * r * r) / q
    B = 1.0 / p - s * q / p**2
    C = -(s1 + s * r) / p + s * q / p**2
    return A, B, C


def rm_norm_closed(A, B, C, n: int) -> np.ndarray:
    wb, wc = family_weights(n)
    return np.sqrt(A**2 + wb * B**2 + wc * C**2)


def rm_norm_components(u1, u2, u3, u4, n: int) -> np.ndarray:
    """|Rm| by summing g^{kk}g^{kk}g^{ll}g^{ll}|R_{kkll}|^2 over every (k, l).

    Uses raw rho-derivatives, so only meaningful away from the divisors; kept
    as an independent check on the closed form.
    """
    u1, u2, u3, u4 = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (u1, u2, u3, u4))
    # e^{rho} factors cancel; set e^{-rho} = 1
    ginv = [1.0 / u2] + [1.0 / u1] * (n - 1)
    total = np.zeros_like(u1)
    for i in range(n):
        for j in range(n):
            if i == 0 and j == 0:
                comp = -u4 + u3**2 / u2
            elif i == j:
                comp = 2.0 * (u1 - u2)
            elif i == 0 or j == 0:
                comp = -u3 + u2**2 / u1
            else:
                comp = u1 - u2
            total = total + (ginv[i] ** 2) * (ginv[j] ** 2) * comp**2
    return np.sqrt(total)


def scalar_rvu(u1, u2, u3, u4, n: int):
    """R from raw rho-derivatives (interior nodes only)."""
    return (-2.0 * (n - 1) * u3 / (u1 * u2) + n * (n - 1) / u1
            - (n - 1) * (n - 2) * u2 / u1**2 + u3**2 / u2**3 - u4 / u2**2)


def _vp_and_sigma_derivative(u: RadialProfile, n: int):
    g = u.grid
    s, s1, s2 = g.s, g.s1, g.s2
    p, q, q1, q2 = u.moments
    r = q1 / q
    vp = n - (n - 1) * s * q / p - (s1 + s * r)
    dvp = (-(n - 1) * ((s1 * q + s * q1) / p - s * q * q / p**2)
           - (s2 + s1 * r + s * q2 / q - s * r * r))
    return vp, dvp


def ricci_coefficients(u: RadialProfile, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(v', v'') with v = n rho - (n-1) log u' - log u''."""
    vp, dvp = _vp_and_sigma_derivative(u, n)
    return vp, u.grid.s * dvp


def ricci_eigenvalues(u: RadialProfile, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Ric relative to g in the fibre and base directions: v''/u'' and v'/u'."""
    vp, dvp = _vp_and_sigma_derivative(u, n)
    return dvp / u.q, vp / u.p


def ricci_lower_margin(u: RadialProfile, t: float, n: int) -> float:
    """min over nodes of t Ric/g + 1; the equation forces this to be >= 0."""
    fibre, base = ricci_eigenvalues(u, n)
    return float(np.min(np.minimum(fibre, base))) * t + 1.0


def curvature_profile(u: RadialProfile, n: int, u0: RadialProfile | None = None) -> CurvatureSample:
    """Geometric quantities at every node.

    tr_g0_g needs the initial class (from u0's slopes) and tr_w_w0 the
    initial potential; both are NaN when u0 is not given.
    """
    g = u.grid
    p, q = u.p, u.q
    if np.any(p <= 0) or np.any(q <= 0):
        raise NonAdmissibleProfile("u' and u'' must be positive")
    A, B, C = abc(u)
    wb, wc = family_weights(n)
    R = A + n * (n - 1) * B + wc * C
    vp, vpp = ricci_coefficients(u, n)
    nan = np.full(g.N, np.nan)
    if u0 is not None:
        ref_p = u0.a + (u0.b - u0.a) * g.sigma
        tr_g0_g = q / (u0.b - u0.a) + (n - 1) * p / ref_p
        tr_w_w0 = u0.q / q + (n - 1) * u0.p / p
    else:
        tr_g0_g = tr_w_w0 = nan
    return CurvatureSample(
        sigma=g.sigma, rho=g.rho, rm_norm=rm_norm_closed(A, B, C, n), R=R,
        ric_vp=vp, ric_vpp=vpp, tr_chi=(n - 1) / p, tr_g0_g=tr_g0_g, tr_w_w0=tr_w_w0,
        A=A, B=B, C=C,
    )


@dataclass
class ScalarCheck:
    max_rel_12: float
    max_rel_13: float
    max_rel_23: float
    tol: float
    passed: bool
    R_rvu: np.ndarray
    R_trace: np.ndarray
    R_vcontract: np.ndarray

    def summary(self) -> dict:
        return {"max_rel_rvu_trace": self.max_rel_12, "max_rel_rvu_vcontract": self.max_rel_13,
                "max_rel_trace_vcontract": self.max_rel_23, "tol": self.tol, "passed": self.passed}


def scalar_routes(u: RadialProfile, u0: RadialProfile, t: float, n: int):
    """Scalar curvature three ways.

    1. the A, B, C combination (all four derivatives of u),
    2. the trace of the continuity equation, (tr_omega omega_0 - n)/t,
    3. v''/u'' + (n-1) v'/u' with v'' from numerically differentiating v'.
    """
    g = u.grid
    p, q = u.p, u.q
    A, B, C = abc(u)
    r1 = A + n * (n - 1) * B + 2 * (n - 1) * C
    r2 = (u0.q / q + (n - 1) * u0.p / p - n) / t
    vp, _ = ricci_coefficients(u, n)
    r3 = g.diff(vp, 1) / q + (n - 1) * vp / p
    return r1, r2, r3


def scalar_cross_checks(u: RadialProfile, u0: RadialProfile, t: float, n: int,
                        tol: float = 1e-4, t_min: float | None = None) -> ScalarCheck:
    """Pairwise agreement of the three scalar-curvature routes.

    Differences are relative to |R| at each node, floored at 1% of sup|R| so
    that zeros of R do not blow the ratio up.
    """
    if t_min is not None and t <= t_min:
        raise ValueError(f"t={t} below t_min={t_min}: the trace route is 0/0 at t = 0")
    if t <= 0:
        raise ValueError("need t > 0")
    r1, r2, r3 = scalar_routes(u, u0, t, n)
    mag = np.maximum(np.abs(r1), np.abs(r2))
    scale = np.maximum(mag, 1e-2 * np.max(mag))

    def rel(x, y):
        return float(np.max(np.abs(x - y) / scale))

    e12, e13, e23 = rel(r1, r2), rel(r1, r3), rel(r2, r3)
    return ScalarCheck(e12, e13, e23, tol, max(e12, e13, e23) <= tol, r1, r2, r3)


@dataclass
class CollapseDiagnostics:
    fiber_diameter: float
    base_scale: float
    sup_H: float


def _arcsine_moments(x0, x1):
    """Integrals of 1 and sigma against 1/sqrt(sigma(1-sigma)) over [x0, x1]."""
    F0 = lambda x: np.arcsin(2.0 * x - 1.0)
    F1 = lambda x: 0.5 * np.arcsin(2.0 * x - 1.0) - np.sqrt(np.clip(x * (1.0 - x), 0.0, None))
    return F0(x1) - F0(x0), F1(x1) - F1(x0)


def fiber_diameter(u: RadialProfile) -> float:
    """(1/2) int sqrt(u'') drho over the fibre.

    In sigma the integrand is sqrt(q/k) / sqrt(sigma(1-sigma)); sqrt(q) is
    interpolated linearly per cell and integrated exactly against the
    arcsine weight, so the divisor singularities cost nothing.
    """
    g = u.grid
    x = g.sigma
    f = np.sqrt(u.q / g.k)
    x0, x1 = x[:-1], x[1:]
    m0, m1 = _arcsine_moments(x0, x1)
    slope = (f[1:] - f[:-1]) / (x1 - x0)
    integral = np.sum(f[:-1] * m0 + slope * (m1 - x0 * m0))
    return 0.5 * float(integral)


def collapse_diagnostics(u: RadialProfile) -> CollapseDiagnostics:
    g = u.grid
    H = g.s * u.q / u.p
    return CollapseDiagnostics(fiber_diameter(u), float(np.sqrt(u.p[g.mid])), float(np.max(H)))


def raw_derivatives(u: RadialProfile):
    return tuple(derivatives(u, m) for m in (1, 2, 3, 4))

