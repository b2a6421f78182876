"""Kähler cone of X_{n,k} and the evolution of the class coefficients (a_t, b_t).

A class is written as ((b - a)/k)[D_inf] + a[D_H] with 0 < a < b.  Under the
continuity method a_t = a0 + (k - n)t and b_t = b0 - (k + n)t, and the run
stops at the first time the pair leaves the cone.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, float, Fraction]

CASE_II_RTOL = 1e-12


class InvalidParams(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def parse_number(text: str | Number) -> Number:
    """Parse "2", "2.5" or "5/2"; integers and fractions stay exact."""
    if isinstance(text, (int, float, Fraction)):
        return text
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    try:
        return int(text)
    except ValueError:
        return float(text)


def _exact(x: Number) -> bool:
    return isinstance(x, Rational)


@dataclass(frozen=True)
class SurfaceParams:
    n: int
    k: int
    a0: Number
    b0: Number

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"n must be an integer >= 2, got {self.n}")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidParams(f"k must be an integer >= 1, got {self.k}")
        if not (0 < self.a0 < self.b0):
            raise InvalidParams(
                f"(a0, b0) = ({self.a0}, {self.b0}) is outside the Kähler cone 0 < a < b")

    @property
    def exact(self) -> bool:
        return _exact(self.a0) and _exact(self.b0)

    @classmethod
    def case_ii(cls, n: int, k: int, a0: Number) -> "SurfaceParams":
        """Build b0 = a0 (n + k)/(n - k) so the Case II equality holds exactly."""
        if k >= n:
            raise InvalidParams("Case II requires k < n")
        a0 = Fraction(a0) if _exact(a0) else a0
        return cls(n, k, a0, a0 * Fraction(n + k, n - k) if _exact(a0) else a0 * (n + k) / (n - k))


@dataclass(frozen=True)
class ClassState:
    t: Number
    a: Number
    b: Number


@dataclass(frozen=True)
class CaseReport:
    case_label: str
    T: Number
    aT: Number
    bT: Number


def _coefficients(params: SurfaceParams, t: Number) -> tuple[Number, Number]:
    n, k = params.n, params.k
    return params.a0 + (k - n) * t, params.b0 - (k + n) * t


def classify(params: SurfaceParams) -> CaseReport:
    n, k, a0, b0 = params.n, params.k, params.a0, params.b0
    if params.exact:
        a0, b0 = Fraction(a0), Fraction(b0)
    lhs, rhs = a0 * (n + k), b0 * (n - k)
    if k >= n:
        label = "I"
    elif params.exact:
        label = "I" if lhs > rhs else ("II" if lhs == rhs else "III")
    elif abs(lhs - rhs) <= CASE_II_RTOL * max(abs(lhs), abs(rhs)):
        label = "II"
    else:
        label = "I" if lhs > rhs else "III"

    if label == "I":
        T = (b0 - a0) / (2 * k)
    else:
        T = a0 / (n - k)
    aT, bT = a0 + (k - n) * T, b0 - (k + n) * T
    if label == "II" and not params.exact:
        # the equality was only detected to tolerance; both limits are zero by definition
        aT, bT = 0.0, 0.0
    return CaseReport(label, T, aT, bT)


def singular_time(params: SurfaceParams) -> Number:
    return classify(params).T


def class_at(params: SurfaceParams, t: Number) -> ClassState:
    T = singular_time(params)
    if t < 0 or t >= T:
        raise OutOfRange(f"t = {t} outside [0, T) with T = {T}")
    a, b = _coefficients(params, t)
    return ClassState(t, a, b)
