"""Calabi-symmetric potentials u(rho) on the compactified coordinate sigma.

sigma = e^{k rho}/(1 + e^{k rho}) maps the real line onto [0, 1], with the
divisor D_0 at sigma = 0 and D_inf at sigma = 1.  A profile stores
psi = u - u_hat where u_hat is the reference potential with the same boundary
slopes (a, b).  In sigma, with s = k sigma (1 - sigma) the Jacobian of
d/drho = s d/dsigma, the first two derivatives read

    u'  = p = u_hat' + s psi_sigma
    u'' = s q,   q = dp/dsigma = (b - a) + s_sigma psi_sigma + s psi_sigmasigma

so every quantity that is singular in rho is a bounded function of p and q
on the closed interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .stencils import abs_diff_matrix, diff_matrix, stretched_nodes


# Rounding in a 4th difference grows like eps/h^4 and overtakes truncation
# well below N = 2049, so orders 3 and 4 are taken on a 2h stencil.
HIGH_ORDER_SPREAD = 2


class InvalidCoefficients(ValueError):
    pass


class NonAdmissibleProfile(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    N: int
    k: int
    stretch: float = 0.0
    cluster: str = "both"

    def __post_init__(self):
        if self.N < 65 or self.N % 2 == 0:
            raise ValueError(f"N must be odd and >= 65, got {self.N}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.stretch < 0:
            raise ValueError("stretch must be >= 0")
        if self.cluster not in ("both", "left"):
            raise ValueError(f"cluster must be 'both' or 'left', got {self.cluster!r}")

    @cached_property
    def sigma(self) -> np.ndarray:
        return stretched_nodes(self.N, self.stretch, self.cluster)

    @property
    def h(self) -> float:
        """Smallest node spacing."""
        return float(np.min(np.diff(self.sigma)))

    @cached_property
    def mid(self) -> int:
        """Index of the node sigma = 1/2 (rho = 0)."""
        return int(np.flatnonzero(self.sigma == 0.5)[0])

    @cached_property
    def rho(self) -> np.ndarray:
        sig = self.sigma
        with np.errstate(divide="ignore"):
            r = (np.log(sig) - np.log1p(-sig)) / self.k
        r[self.mid] = 0.0
        return r

    @cached_property
    def s(self) -> np.ndarray:
        """k sigma (1 - sigma) and its sigma-derivatives."""
        sig = self.sigma
        return self.k * sig * (1.0 - sig)

    @cached_property
    def s1(self) -> np.ndarray:
        return self.k * (1.0 - 2.0 * self.sigma)

    @property
    def s2(self) -> float:
        return -2.0 * self.k

    def diff(self, values: np.ndarray, order: int) -> np.ndarray:
        return self.diff_matrix(order) @ values

    def diff_matrix(self, order: int):
        """Third and fourth derivatives use every other node (see HIGH_ORDER_SPREAD)."""
        spread = HIGH_ORDER_SPREAD if order >= 3 else 1
        return diff_matrix(self.N, order, float(self.stretch), self.cluster, spread)

    def abs_diff_matrix(self, order: int):
        spread = HIGH_ORDER_SPREAD if order >= 3 else 1
        return abs_diff_matrix(self.N, order, float(self.stretch), self.cluster, spread)


def reference_constant(a: float, b: float, k: int) -> float:
    """Additive constant making u_hat(0) = 0."""
    return -(b - a) * math.log(2.0) / k


def reference_values(a: float, b: float, grid: Grid) -> np.ndarray:
    """u_hat = a rho + ((b - a)/k) log(e^{k rho} + 1) - const, written in sigma."""
    sig, k = grid.sigma, grid.k
    with np.errstate(divide="ignore"):
        u = (a / k) * np.log(sig) - (b / k) * np.log1p(-sig) + reference_constant(a, b, k)
    u[grid.mid] = 0.0
    return u


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: Grid
    a: float
    b: float
    psi: np.ndarray = field(repr=False)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.shape != (self.grid.N,):
            raise ValueError(f"psi has shape {psi.shape}, grid has N={self.grid.N}")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def k(self) -> int:
        return self.grid.k

    @cached_property
    def psi_derivs(self) -> tuple[np.ndarray, ...]:
        """(psi_sigma, ..., d^4 psi/dsigma^4)."""
        return tuple(self.grid.diff(self.psi, m) for m in range(1, 5))

    @cached_property
    def moments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """p = u', q = dp/dsigma and the first two sigma-derivatives of q."""
        g = self.grid
        d1, d2, d3, d4 = self.psi_derivs
        s, s1, s2 = g.s, g.s1, g.s2
        p = self.a + (self.b - self.a) * g.sigma + s * d1
        q = (self.b - self.a) + s1 * d1 + s * d2
        q1 = s2 * d1 + 2.0 * s1 * d2 + s * d3
        q2 = 3.0 * s2 * d2 + 3.0 * s1 * d3 + s * d4
        return p, q, q1, q2

    @property
    def p(self) -> np.ndarray:
        return self.moments[0]

    @property
    def q(self) -> np.ndarray:
        return self.moments[1]

    def u(self) -> np.ndarray:
        """Potential values; +-inf at the divisors, u(0) = psi(mid)."""
        return reference_values(self.a, self.b, self.grid) + self.psi

    def with_psi(self, psi: np.ndarray) -> "RadialProfile":
        return RadialProfile(self.grid, self.a, self.b, psi)

    def scaled(self, factor: float) -> "RadialProfile":
        """Profile of factor * u.

        u_hat is linear in (a, b) apart from its normalising constant, which is
        also linear, so factor * u has slopes (factor a, factor b) and
        psi -> factor psi.
        """
        return RadialProfile(self.grid, factor * self.a, factor * self.b, factor * self.psi)


def reference_profile(a: float, b: float, k: int, grid: Grid) -> RadialProfile:
    if not (0 < a < b):
        raise InvalidCoefficients(f"need 0 < a < b, got a={a}, b={b}")
    if grid.k != k:
        raise ValueError("grid built for a different k")
    return RadialProfile(grid, a, b, np.zeros(grid.N))


def reference_derivatives(a: float, b: float, k: int, sigma) -> tuple:
    """Closed-form u_hat', ..., u_hat'''' at the given sigma values."""
    sig = np.asarray(sigma, dtype=float)
    w = sig * (1.0 - sig)
    return (
        a + (b - a) * sig,
        k * (b - a) * w,
        k**2 * (b - a) * w * (1.0 - 2.0 * sig),
        k**3 * (b - a) * w * (1.0 - 6.0 * sig + 6.0 * sig**2),
    )


def derivatives(profile: RadialProfile, order: int) -> np.ndarray:
    """d^order u / drho^order at every node.

    The analytic u_hat part carries the boundary behaviour; psi enters through
    chain-rule factors of s that vanish at sigma = 0 and 1.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be 1..4")
    g = profile.grid
    s, s1, s2 = g.s, g.s1, g.s2
    d1, d2, d3, d4 = profile.psi_derivs
    ref = reference_derivatives(profile.a, profile.b, g.k, g.sigma)[order - 1]
    if order == 1:
        extra = s * d1
    else:
        # psi part of q and its derivatives (q without the constant b - a)
        e0 = s1 * d1 + s * d2
        e1 = s2 * d1 + 2.0 * s1 * d2 + s * d3
        e2 = 3.0 * s2 * d2 + 3.0 * s1 * d3 + s * d4
        if order == 2:
            extra = s * e0
        elif order == 3:
            extra = s * (s1 * e0 + s * e1)
        else:
            extra = s * ((s1**2 + s * s2) * e0 + 3.0 * s * s1 * e1 + s**2 * e2)
    return ref + extra


@dataclass
class CalabiReport:
    min_up: float
    min_upp_interior: float
    min_q: float
    normalization_residual: float
    upper_violation: float
    lower_violation: float
    endpoint_psi_bounded: bool
    bad_nodes: list[int]
    passed: bool
    normalization_ok: bool
    tol: float = 1e-12

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate_calabi(profile: RadialProfile, tol: float = 1e-12) -> CalabiReport:
    """Check u' > 0, u'' > 0, a <= u' <= b, u(0) = 0 and regularity at the divisors.

    Smoothness across D_0/D_inf holds when psi and its first two sigma
    derivatives are finite at the ends, which is what the divisor potentials
    amount to in this coordinate; q > 0 at the ends is the positivity of
    their first derivative.
    """
    p, q = profile.p, profile.q
    upp = profile.grid.s * q
    interior = slice(1, -1)
    bad = np.flatnonzero((p <= 0) | (q <= 0))
    upper = float(np.max(p[interior] - profile.b, initial=-np.inf))
    lower = float(np.max(profile.a - p[interior], initial=-np.inf))
    d1, d2 = profile.psi_derivs[:2]
    ends = [0, -1]
    finite = bool(np.all(np.isfinite([profile.psi[ends], d1[ends], d2[ends]])))
    norm_res = abs(float(profile.psi[profile.grid.mid]))
    norm_ok = norm_res <= tol
    passed = bad.size == 0 and finite and norm_ok and upper <= tol * max(1.0, profile.b) \
        and lower <= tol * max(1.0, profile.b)
    return CalabiReport(
        min_up=float(p.min()),
        min_upp_interior=float(upp[interior].min()),
        min_q=float(q.min()),
        normalization_residual=norm_res,
        upper_violation=upper,
        lower_violation=lower,
        endpoint_psi_bounded=finite,
        bad_nodes=[int(i) for i in bad],
        passed=passed,
        normalization_ok=norm_ok,
        tol=tol,
    )
