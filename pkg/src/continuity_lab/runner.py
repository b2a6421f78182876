"""Run configuration and the solve -> analyse -> write pipeline."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import io
from .analysis import BoundReport, RunSeries, Verdict, VerdictConfig, case_verdict, summarize, verify_bounds
from .cohomology import CaseReport, SurfaceParams, classify, parse_number
from .curvature import collapse_diagnostics, curvature_profile, scalar_cross_checks
from .profile import Grid, RadialProfile, reference_profile, validate_calabi
from .solver import ContinuationStall, Emitted, SolverConfig, continuation, geometric_schedule, log_gap_schedule

log = logging.getLogger(__name__)

# Case III concentrates curvature in a layer of width ~ a_t at sigma = 0
CASE_III_STRETCH = 8.0


@dataclass
class RunConfig:
    n: int = 3
    k: int = 1
    a0: object = 2
    b0: object = 3
    case_ii: bool = False
    N: int = 2049
    stretch: float | None = None
    cluster: str | None = None
    schedule: str = "log-gap"
    gap_max: float = 0.5
    gap_min: float = 1e-3
    per_decade: int = 10
    J: int = 24
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 1.0
    min_gap: float | None = None
    max_substeps: int = 64
    out_dir: str | None = None
    profile_format: str = "bin"
    sample_stride: int = 16
    initial_profile: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.a0 = parse_number(self.a0)
        self.b0 = parse_number(self.b0)
        if self.schedule not in ("log-gap", "geometric"):
            raise ValueError(f"schedule must be 'log-gap' or 'geometric', got {self.schedule!r}")
        if self.profile_format not in ("json", "bin", "both"):
            raise ValueError(f"profile_format must be json, bin or both")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if not 0 < self.gap_min < self.gap_max < 1:
            raise ValueError("need 0 < gap_min < gap_max < 1")

    def params(self) -> SurfaceParams:
        if self.case_ii:
            return SurfaceParams.case_ii(self.n, self.k, self.a0)
        return SurfaceParams(self.n, self.k, self.a0, self.b0)

    def grid(self, report: CaseReport) -> Grid:
        """Uniform for Cases I and II; clustered toward sigma = 0 for Case III unless set."""
        if self.stretch is None:
            stretch, cluster = (CASE_III_STRETCH, "left") if report.case_label == "III" else (0.0, "both")
        else:
            stretch, cluster = self.stretch, "both"
        if self.cluster is not None:
            cluster = self.cluster
        return Grid(self.N, self.k, float(stretch), cluster)

    def initial_data(self, params: SurfaceParams, grid: Grid) -> RadialProfile:
        """u_hat_0 by default, otherwise the stored profile named by initial_profile."""
        a0, b0 = float(params.a0), float(params.b0)
        if self.initial_profile is None:
            return reference_profile(a0, b0, params.k, grid)
        u, n, _ = io.load_profile(self.initial_profile)
        g = u.grid
        if n != params.n or (g.N, g.k, g.stretch, g.cluster) != (grid.N, grid.k, grid.stretch, grid.cluster):
            raise ValueError(f"{self.initial_profile}: dimension or grid differs from the run's")
        if not (math.isclose(u.a, a0, rel_tol=1e-12) and math.isclose(u.b, b0, rel_tol=1e-12)):
            raise ValueError(f"{self.initial_profile}: slopes ({u.a}, {u.b}) differ from (a0, b0)")
        report = validate_calabi(u)
        if not report.passed:
            raise ValueError(f"{self.initial_profile}: initial profile is not admissible")
        return u

    def times(self, T: float) -> list[float]:
        if self.schedule == "geometric":
            return geometric_schedule(T, self.J)
        return log_gap_schedule(T, self.gap_max, self.gap_min, self.per_decade)

    def solver_config(self, T: float) -> SolverConfig:
        return SolverConfig(newton_tol=self.newton_tol, max_newton_iters=self.max_newton_iters,
                            damping=self.damping, schedule=self.times(T), J=self.J,
                            min_gap=self.min_gap, max_substeps=self.max_substeps)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("a0", "b0"):
            d[key] = str(d[key]) if isinstance(d[key], Fraction) else d[key]
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(doc)


@dataclass
class RunResult:
    config: RunConfig
    params: SurfaceParams
    report: CaseReport
    grid: Grid
    emitted: list[Emitted]
    series: RunSeries | None
    bounds: BoundReport | None
    verdict: Verdict | None
    scalar_checks: list[dict]
    complete: bool
    stall: str | None = None
    wall_time: float = 0.0
    schedule: list[float] = field(default_factory=list)
    u0: RadialProfile | None = None

    @property
    def profiles(self):
        return [e.profile for e in self.emitted]


def execute(config: RunConfig, verdict_config: VerdictConfig | None = None,
            callback=None) -> RunResult:
    """Solve the whole schedule and analyse whatever was reached."""
    start = time.perf_counter()
    params = config.params()
    report = classify(params)
    T = float(report.T)
    grid = config.grid(report)
    u0 = config.initial_data(params, grid)
    solver_cfg = config.solver_config(T)
    schedule, _ = solver_cfg.resolve(T)
    stall = None
    try:
        emitted = continuation(u0, params, solver_cfg, callback)
    except ContinuationStall as exc:
        emitted, stall = exc.emitted, str(exc)
        log.warning("continuation stalled: %s", stall)

    series = bounds = verdict = None
    checks = []
    if emitted:
        profiles = [e.profile for e in emitted]
        series = summarize(profiles, [e.t for e in emitted], params, report)
        bounds = verify_bounds(series)
        verdict = case_verdict(params, series, bounds, verdict_config)
        for e in emitted:
            chk = scalar_cross_checks(e.profile, u0, e.t, params.n, t_min=1e-3 * T)
            checks.append({k: v for k, v in chk.summary().items() if k != "tol"})
    return RunResult(config, params, report, grid, emitted, series, bounds, verdict, checks,
                     complete=stall is None, stall=stall, wall_time=time.perf_counter() - start,
                     schedule=schedule, u0=u0)


SERIES_FIELDS = ["t", "gap", "sup_rm", "sup_R", "inf_R", "R_mid", "fiber_diam", "base_scale",
                 "sup_H", "sup_u", "normalized_step"]
SAMPLE_FIELDS = ["t", "sigma", "rho", "rm_norm", "R", "v_p", "v_pp", "tr_chi", "tr_g0_g",
                 "tr_w_w0", "fiber_diam"]


def sample_indices(N: int, stride: int) -> np.ndarray:
    idx = np.arange(0, N, stride)
    return idx if idx[-1] == N - 1 else np.append(idx, N - 1)


def check_writable(out_dir) -> Path:
    """Create out_dir if needed; raise PermissionError when it cannot be written."""
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PermissionError(f"cannot create {path}: {exc}") from exc
    if not os.access(path, os.W_OK | os.X_OK):
        raise PermissionError(f"{path} is not writable")
    return path


def write_artifacts(result: RunResult, out_dir) -> Path:
    out = check_writable(out_dir)
    cfg, params = result.config, result.params
    n = params.n
    prof_dir = out / "profiles"
    prof_dir.mkdir(exist_ok=True)
    u0 = result.u0
    if u0 is None:
        u0 = reference_profile(float(params.a0), float(params.b0), params.k, result.grid)

    steps = []
    for i, (e, chk) in enumerate(zip(result.emitted, result.scalar_checks)):
        files = []
        if cfg.profile_format in ("bin", "both"):
            name = f"profiles/{i:04d}.bin"
            io.save_binary(out / name, e.profile, n)
            files.append(name)
        if cfg.profile_format in ("json", "both"):
            name = f"profiles/{i:04d}.json"
            io.save_json(out / name, e.profile, n, t=e.t, a0=float(params.a0), b0=float(params.b0))
            files.append(name)
        steps.append({
            "t": e.t, "iterations": e.info.iterations, "residual": e.info.residual,
            "c": e.info.c, "floor": e.info.floor, "floor_limited": e.info.floor_limited,
            "history": e.info.history, "substeps": e.substeps, "profiles": files,
            "scalar_check": chk,
        })
    rep = result.report
    index = {
        "params": {"n": n, "k": params.k, "a0": str(params.a0), "b0": str(params.b0)},
        "case": {"label": rep.case_label, "T": str(rep.T), "aT": str(rep.aT), "bT": str(rep.bT)},
        "grid": {"N": result.grid.N, "stretch": result.grid.stretch, "cluster": result.grid.cluster},
        "config": cfg.to_dict(),
        "schedule": result.schedule,
        "steps": steps,
        "complete": result.complete,
        "partial": not result.complete,
        "stall": result.stall,
    }
    io.write_json(out / "index.json", index)

    series = result.series
    if series is not None:
        ratio_names = list(series.entries[0].bound_ratios)
        io.write_csv(out / "series.csv", SERIES_FIELDS + ratio_names,
                     ([getattr(e, f) for f in SERIES_FIELDS] + [e.bound_ratios[r] for r in ratio_names]
                      for e in series.entries))
    else:
        io.write_csv(out / "series.csv", SERIES_FIELDS, [])

    idx = sample_indices(result.grid.N, cfg.sample_stride)
    rows = []
    for e in result.emitted:
        cs = curvature_profile(e.profile, n, u0)
        fd = collapse_diagnostics(e.profile).fiber_diameter
        for j in idx:
            rows.append([e.t, cs.sigma[j], cs.rho[j], cs.rm_norm[j], cs.R[j], cs.ric_vp[j],
                         cs.ric_vpp[j], cs.tr_chi[j], cs.tr_g0_g[j], cs.tr_w_w0[j], fd])
    io.write_csv(out / "samples.csv", SAMPLE_FIELDS, rows)

    verdict = {"complete": result.complete}
    if result.verdict is not None:
        verdict.update(result.verdict.as_dict())
        verdict["bounds"] = result.bounds.as_dict()
    else:
        verdict.update({"status": "inconclusive", "reasons": ["no solved times"]})
    io.write_json(out / "verdict.json", verdict)

    meta = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(result.wall_time, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "host": platform.node(),
    }
    io.write_json(out / "meta.json", meta)
    return out
