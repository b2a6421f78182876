"""Time series of a continuation run, power-law fits, bound suites and verdicts.

Every rate is expressed against the gap T - t: a quantity Q is fitted as
Q ~ C gap^(-alpha), so curvature blow-up has alpha > 0 and a collapsing
length has alpha < 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cohomology import CaseReport, SurfaceParams, classify
from .curvature import collapse_diagnostics, curvature_profile
from .profile import RadialProfile


class InsufficientSamples(ValueError):
    pass


# slack for ratios with explicit constants; the scalar one involves u'''' and
# is only as good as the fourth-derivative stencils
WINDOW_TOL = 1e-9
LOOSE_TOL = {"scalar_lower_hi": 1e-4}


@dataclass
class SeriesEntry:
    t: float
    gap: float
    sup_rm: float
    sup_R: float
    inf_R: float
    R_mid: float
    fiber_diam: float
    base_scale: float
    sup_H: float
    sup_u: float
    normalized_step: float
    bound_ratios: dict = field(default_factory=dict)


@dataclass
class RunSeries:
    params: SurfaceParams
    case_label: str
    T: float
    entries: list[SeriesEntry]

    def __post_init__(self):
        gaps = [e.gap for e in self.entries]
        if any(b >= a for a, b in zip(gaps, gaps[1:])):
            raise ValueError("gaps must be strictly decreasing")
        for e in self.entries:
            vals = (e.sup_rm, e.sup_R, e.sup_H, e.sup_u, e.fiber_diam)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"non-finite summary at t={e.t}")

    def __len__(self):
        return len(self.entries)

    def column(self, name: str) -> np.ndarray:
        """A summary field or a bound ratio, one value per entry."""
        if self.entries and name in self.entries[0].bound_ratios:
            return np.array([e.bound_ratios[name] for e in self.entries])
        return np.array([getattr(e, name) for e in self.entries], dtype=float)

    @property
    def gaps(self) -> np.ndarray:
        return self.column("gap")


def bound_ratios(u: RadialProfile, t: float, params: SurfaceParams,
                 report: CaseReport) -> dict:
    """Per-time ratios for the inequalities of report's case.

    Keys ending in _lo must stay >= 1 and keys ending in _hi <= 1 (the
    inequality has explicit constants); the others only have to stay bounded,
    which is judged from their drift over the run.  The u' windows are strict
    inequalities on the real line, so they are taken over interior nodes; the
    end nodes are the divisors where u' equals a_t or b_t exactly.
    """
    n, k = params.n, params.k
    a0, b0 = float(params.a0), float(params.b0)
    gap = float(report.T) - t
    g = u.grid
    p, q, q1, _ = u.moments
    curv = curvature_profile(u, n)
    u3_over_u2 = np.abs(g.s1 + g.s * q1 / q)
    inner = slice(1, -1)
    sup_rm = float(np.max(curv.rm_norm))

    out = {
        "R_gap": float(np.max(curv.R)) * gap,
        "scalar_lower_hi": max(0.0, -float(np.min(curv.R))) * t / n,
    }
    if report.case_label == "I":
        # u' > a_t >= min(a0, a_T): a_t decreases when k < n
        lower = min(a0, float(report.aT))
        tr_g0_g = q / (b0 - a0) + (n - 1) * p / (a0 + (b0 - a0) * g.sigma)
        out.update({
            "up_lo": float(np.min(p[inner])) / lower,
            "up_hi": float(np.max(p[inner])) / (u.a + 2 * k * gap),
            "schwarz_hi": float(np.max((n - 1) / p)) * lower / (n - 1),
            "upp_envelope": float(np.max(k * q)) / gap,
            "upp_envelope_inv": gap / float(np.min(k * q)),
            "u3_over_u2": float(np.max(u3_over_u2)),
            "tr_g0_g": float(np.max(tr_g0_g)),
            "rm_gap": sup_rm * gap,
        })
    elif report.case_label == "II":
        out.update({
            "up_lo": float(np.min(p[inner])) / ((n - k) * gap),
            "up_hi": float(np.max(p[inner])) / ((n + k) * gap),
            "upp_envelope": float(np.max(k * q)) / gap,
            "upp_envelope_inv": gap / float(np.min(k * q)),
            "u3_over_u2": float(np.max(u3_over_u2)),
            "rm_gap": sup_rm * gap,
        })
    else:
        sup_H = float(np.max(g.s * q / p))
        out.update({
            "up_lo": float(np.min(p[inner])) / ((n - k) * gap),
            "up_hi": float(np.max(p[inner])) / ((n + k) * gap + b0),
            "upp_lower_inv": 1.0 / float(np.min(k * q)),
            "H_gap": sup_H * gap,
            "u3_over_u2_gap": float(np.max(u3_over_u2)) * gap,
            "rm_gap2": sup_rm * gap**2,
        })
    return out


def weighted_sup(u: RadialProfile) -> float:
    """sup over the line of |u(rho)|/(1 + |rho|).

    u is asymptotically linear with slopes a, b at the two divisors, so the
    end nodes contribute their limits a and b.
    """
    g = u.grid
    inner = slice(1, -1)
    vals = np.abs(u.u()[inner]) / (1.0 + np.abs(g.rho[inner]))
    return float(max(np.max(vals), abs(u.a), abs(u.b)))


def summarize(profiles: list[RadialProfile], times: list[float], params: SurfaceParams,
              report: CaseReport | None = None) -> RunSeries:
    """Build the series from solved profiles at increasing times."""
    report = report or classify(params)
    T = float(report.T)
    n = params.n
    entries = []
    prev = None
    for u, t in zip(profiles, times):
        gap = T - t
        curv = curvature_profile(u, n)
        coll = collapse_diagnostics(u)
        mid = u.grid.mid
        scaled = u.psi / gap
        step = float(np.max(np.abs(scaled - prev))) if prev is not None else math.nan
        prev = scaled
        entries.append(SeriesEntry(
            t=float(t), gap=gap,
            sup_rm=float(np.max(curv.rm_norm)),
            sup_R=float(np.max(curv.R)),
            inf_R=float(np.min(curv.R)),
            R_mid=float(curv.R[mid]),
            fiber_diam=coll.fiber_diameter,
            base_scale=coll.base_scale,
            sup_H=coll.sup_H,
            sup_u=weighted_sup(u),
            normalized_step=step,
            bound_ratios=bound_ratios(u, float(t), params, report),
        ))
    return RunSeries(params, report.case_label, T, entries)


@dataclass
class RateFit:
    exponent: float
    log_constant: float
    r_squared: float
    window: tuple[float, float]
    samples: int

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "log_constant": self.log_constant,
                "r_squared": self.r_squared, "window": list(self.window), "samples": self.samples}


def _in_window(gaps: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    hi, lo = max(window), min(window)
    return (gaps <= hi * (1 + 1e-9)) & (gaps >= lo * (1 - 1e-9))


def fit_power(gaps, values, window=None, min_samples: int = 8) -> RateFit:
    """Least squares of log(values) on log(gaps); values ~ C gaps^(-alpha)."""
    gaps = np.asarray(gaps, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(gaps.max()), float(gaps.min()))
    sel = _in_window(gaps, window)
    if sel.sum() < min_samples:
        raise InsufficientSamples(
            f"{int(sel.sum())} samples in gap window {window}, need {min_samples}")
    x, y = np.log(gaps[sel]), values[sel]
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fit needs positive finite values")
    y = np.log(y)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(float(-slope), float(intercept), r2, (float(max(window)), float(min(window))),
                   int(sel.sum()))


def fit_rate(series: RunSeries, quantity: str, window=None, min_samples: int = 8) -> RateFit:
    """Fit quantity ~ C gap^(-alpha) over window = (gap_max, gap_min), absolute gaps."""
    return fit_power(series.gaps, series.column(quantity), window, min_samples)


@dataclass
class BoundCheck:
    name: str
    kind: str          # "lo", "hi" or "bounded"
    worst: float
    first_decade: float
    last_decade: float
    drift: float
    passed: bool


@dataclass
class BoundReport:
    case_label: str
    checks: list[BoundCheck]
    passed: bool

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"case": self.case_label, "passed": self.passed,
                "checks": [c.__dict__ for c in self.checks]}


def _decades(gaps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    first = gaps >= gaps.max() / 10 * (1 - 1e-9)
    last = gaps <= gaps.min() * 10 * (1 + 1e-9)
    return first, last


def verify_bounds(series: RunSeries, profiles: list[RadialProfile] | None = None,
                  report: CaseReport | None = None, max_drift: float = 10.0) -> BoundReport:
    """Check every ratio of the case's lemma over the run.

    With profiles (aligned with series.entries) the ratios are recomputed
    against report, which may name a different case than the run's own.
    Ratios with explicit constants must respect them at every time; the rest
    pass when finite and their largest value over the last gap decade is
    within max_drift of that over the first.
    """
    report = report or classify(series.params)
    if profiles is not None:
        ratios = [bound_ratios(u, e.t, series.params, report)
                  for u, e in zip(profiles, series.entries)]
    else:
        ratios = [e.bound_ratios for e in series.entries]
    gaps = series.gaps
    first, last = _decades(gaps)
    checks = []
    for name in ratios[0]:
        vals = np.array([r[name] for r in ratios], dtype=float)
        finite = bool(np.all(np.isfinite(vals)))
        f_max, l_max = float(np.max(vals[first])), float(np.max(vals[last]))
        drift = l_max / f_max if f_max > 0 else (math.inf if l_max > 0 else 1.0)
        if name.endswith("_lo"):
            worst = float(np.min(vals))
            ok = finite and worst >= 1.0 - LOOSE_TOL.get(name, WINDOW_TOL)
            kind = "lo"
        elif name.endswith("_hi"):
            worst = float(np.max(vals))
            ok = finite and worst <= 1.0 + LOOSE_TOL.get(name, WINDOW_TOL)
            kind = "hi"
        else:
            worst = float(np.max(vals))
            ok = finite and drift <= max_drift
            kind = "bounded"
        checks.append(BoundCheck(name, kind, worst, f_max, l_max, drift, ok))
    return BoundReport(report.case_label, checks, all(c.passed for c in checks))


@dataclass
class VerdictConfig:
    fit_window: tuple[float, float] = (1e-1, 1e-3)   # relative to T
    alpha_window: tuple[float, float] = (0.85, 1.15)
    case3_rm_max: float = 2.1
    fiber_window: tuple[float, float] = (0.4, 0.6)
    max_drift: float = 10.0
    min_samples: int = 8


@dataclass
class Verdict:
    case_label: str
    status: str                   # "pass", "fail" or "inconclusive"
    fits: dict
    checks: dict
    measured: dict
    reasons: list[str]

    def as_dict(self) -> dict:
        return {"case": self.case_label, "status": self.status,
                "fits": {k: v.as_dict() for k, v in self.fits.items()},
                "checks": self.checks, "measured": self.measured, "reasons": self.reasons}


def _last_decade(series: RunSeries) -> tuple[float, float]:
    g = series.gaps
    return float(g.min() * 10), float(g.min())


def case_verdict(params: SurfaceParams, series: RunSeries, bounds: BoundReport,
                 config: VerdictConfig | None = None) -> Verdict:
    """Per-case pass/fail of the rate statements; "inconclusive" if a fit lacks samples."""
    cfg = config or VerdictConfig()
    T = series.T
    window = (cfg.fit_window[0] * T, cfg.fit_window[1] * T)
    lo, hi = cfg.alpha_window
    fits, checks, measured, reasons = {}, {}, {}, []
    missing = set()

    def fit(name, quantity, win=window):
        try:
            fits[name] = fit_rate(series, quantity, win, cfg.min_samples)
            return fits[name]
        except (InsufficientSamples, ValueError) as exc:
            reasons.append(f"{name}: {exc}")
            missing.add(name)
            return None

    rm = fit("sup_rm", "sup_rm")
    sR = fit("sup_R", "sup_R")
    label = series.case_label
    last = _last_decade(series)

    if label in ("I", "II"):
        checks["sup_rm_rate"] = rm is not None and lo <= rm.exponent <= hi
        checks["sup_R_rate"] = sR is not None and lo <= sR.exponent <= hi
        mid = fit("R_mid_last_decade", "R_mid", last)
        sel = _in_window(series.gaps, last)
        r_gap = series.column("R_mid")[sel] * series.gaps[sel]
        measured["R_mid_gap_min_last_decade"] = float(r_gap.min()) if r_gap.size else math.nan
        checks["essential"] = bool(mid is not None and r_gap.size and r_gap.min() > 0
                                   and mid.exponent >= lo)
    else:
        checks["sup_rm_rate"] = rm is not None and rm.exponent <= cfg.case3_rm_max
        checks["sup_R_rate"] = sR is not None and sR.exponent <= hi
        if sR is not None:
            measured["sup_R_rate_in_window"] = lo <= sR.exponent <= hi
        rg2 = series.column("sup_rm") * series.gaps**2
        first, lastm = _decades(series.gaps)
        measured["sup_rm_gap2_max"] = float(rg2.max())
        checks["sup_rm_gap2_bounded"] = bool(rg2[lastm].max() <= cfg.max_drift * rg2[first].max())
        hg = series.column("sup_H") * series.gaps
        measured["sup_H_gap_max"] = float(hg.max())
        checks["sup_H_gap_bounded"] = bool(np.all(np.isfinite(hg))
                                           and hg[lastm].max() <= cfg.max_drift * hg[first].max())

    rg = series.column("sup_R") * series.gaps
    measured["sup_R_gap_max"] = float(rg.max())

    if label == "I":
        fd = fit("fiber_diam", "fiber_diam")
        if fd is not None:
            measured["fiber_exponent"] = -fd.exponent
        checks["fiber_collapse"] = fd is not None and \
            cfg.fiber_window[0] <= -fd.exponent <= cfg.fiber_window[1]
    elif label == "II":
        sel = _in_window(series.gaps, last)
        su = series.column("sup_u")[sel]
        checks["sup_u_to_zero"] = bool(su.size >= 2 and np.all(np.diff(su) < 0))
        measured["sup_u_last"] = float(su[-1]) if su.size else math.nan
        steps = series.column("normalized_step")[sel]
        measured["normalized_cauchy_last_decade"] = [float(x) for x in steps]

    checks["bounds"] = bounds.passed
    if not bounds.passed:
        reasons.append("bound failures: " + ", ".join(bounds.failures()))
    checks = {name: bool(ok) for name, ok in checks.items()}
    # checks that depend on a missing fit cannot fail on their own
    needs_fit = {"sup_rm_rate": "sup_rm", "sup_R_rate": "sup_R",
                 "essential": "R_mid_last_decade", "fiber_collapse": "fiber_diam"}
    undecided = {c for c, f in needs_fit.items() if f in missing and c in checks}
    decided = {c: ok for c, ok in checks.items() if c not in undecided}
    if not all(decided.values()):
        status = "fail"
        reasons.extend(f"{c} failed" for c, ok in decided.items() if not ok)
    elif undecided:
        status = "inconclusive"
    else:
        status = "pass"
    for name, f in fits.items():
        measured[f"alpha_{name}"] = f.exponent
    return Verdict(label, status, fits, checks, measured, reasons)
