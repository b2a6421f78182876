"""Command-line front end: classify, run, report, sweep, check."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .analysis import InsufficientSamples, fit_power
from .cohomology import InvalidParams, SurfaceParams, classify, parse_number
from .curvature import curvature_profile, scalar_cross_checks
from .profile import derivatives, reference_profile, validate_calabi
from .runner import RunConfig, check_writable, execute, sample_indices, write_artifacts

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_STALL = 3
EXIT_UNWRITABLE = 4
EXIT_BAD_INDEX = 5
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(text):
    try:
        return parse_number(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _add_params(p, required=True):
    p.add_argument("-n", type=int, required=required, help="complex dimension")
    p.add_argument("-k", type=int, required=required, help="twist of the line bundle")
    p.add_argument("--a0", type=_number, required=required, help="accepts fractions, e.g. 5/2")
    p.add_argument("--b0", type=_number, help="ignored with --case ii")
    p.add_argument("--case", choices=["ii"], help="build b0 = a0 (n+k)/(n-k) exactly")


def _run_options(p):
    _add_params(p, required=False)
    p.add_argument("--config", help="flat JSON RunConfig; flags override its values")
    p.add_argument("-N", type=int)
    p.add_argument("--stretch", type=float)
    p.add_argument("--cluster", choices=["both", "left"])
    p.add_argument("--schedule", choices=["log-gap", "geometric"])
    p.add_argument("--gap-max", type=float)
    p.add_argument("--gap-min", type=float)
    p.add_argument("--per-decade", type=int)
    p.add_argument("-J", type=int)
    p.add_argument("--newton-tol", type=float)
    p.add_argument("--max-iters", type=int, dest="max_newton_iters")
    p.add_argument("--damping", type=float)
    p.add_argument("--format", choices=["json", "bin", "both"], dest="profile_format")
    p.add_argument("--sample-stride", type=int)
    p.add_argument("--initial", dest="initial_profile", help="stored profile used as u0 instead of u_hat_0")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="continuity-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="case, singular time and limit class")
    _add_params(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("run", help="solve a continuation run and write its artifacts")
    _run_options(p)
    p.add_argument("--out", help="run directory")
    p.add_argument("--dry-run", action="store_true", help="print the schedule and exit")
    p.add_argument("--json", action="store_true", help="print the verdict as JSON")

    p = sub.add_parser("report", help="plot-ready CSVs and exponent table for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", help="defaults to RUN_DIR/report")

    p = sub.add_parser("sweep", help="several runs, one worker process per run")
    p.add_argument("configs", nargs="+", help="config files; each run goes to OUT/<file stem>")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("check", help="Calabi validity and scalar cross-checks on a stored profile")
    p.add_argument("profile")
    p.add_argument("-t", type=float, help="time of the profile (read from the run index if omitted)")
    p.add_argument("--a0", type=_number)
    p.add_argument("--b0", type=_number)
    p.add_argument("--initial", help="stored u0 when the run did not start from u_hat_0")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--json", action="store_true")
    return parser


def _params_from_args(args) -> SurfaceParams:
    if args.case == "ii":
        return SurfaceParams.case_ii(args.n, args.k, args.a0)
    if args.b0 is None:
        raise UsageError("--b0 is required unless --case ii is given")
    return SurfaceParams(args.n, args.k, args.a0, args.b0)


def cmd_classify(args) -> int:
    params = _params_from_args(args)
    rep = classify(params)
    if args.json:
        print(json.dumps({"case": rep.case_label, "T": str(rep.T), "aT": str(rep.aT),
                          "bT": str(rep.bT), "T_float": float(rep.T)}))
    else:
        print(f"Case {rep.case_label}, T={rep.T}, aT={rep.aT}, bT={rep.bT}")
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    keys = ("n", "k", "a0", "b0", "N", "stretch", "cluster", "schedule", "gap_max", "gap_min",
            "per_decade", "J", "newton_tol", "max_newton_iters", "damping", "profile_format",
            "sample_stride", "initial_profile")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "case", None) == "ii":
        overrides["case_ii"] = True
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        doc.update(overrides)
    else:
        missing = [k for k in ("n", "k", "a0") if k not in overrides]
        if missing or ("b0" not in overrides and not overrides.get("case_ii")):
            raise UsageError("give --config or all of -n, -k, --a0, --b0")
        doc = overrides
    try:
        return RunConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise UsageError(str(exc)) from exc


def _summary_line(result) -> str:
    v = result.verdict
    if v is None:
        return "no solved times"
    alphas = ", ".join(f"alpha({k})={f.exponent:.4f}" for k, f in v.fits.items())
    return f"Case {v.case_label}: {v.status}; {alphas}"


def cmd_run(args) -> int:
    config = _config_from_args(args)
    params = config.params()
    report = classify(params)
    T = float(report.T)
    if args.dry_run:
        sched, _ = config.solver_config(T).resolve(T)
        print(f"Case {report.case_label}, T={report.T}, grid={config.grid(report)}")
        for t in sched:
            print(f"{t!r}\t{(T - t) / T:.6e}")
        return EXIT_OK
    if not args.out:
        raise UsageError("run needs --out (or --dry-run)")
    check_writable(args.out)
    result = execute(config)
    write_artifacts(result, args.out)
    if args.json:
        print(json.dumps(result.verdict.as_dict() if result.verdict else {}, default=str))
    else:
        print(_summary_line(result))
    if not result.complete:
        print(f"stalled: {result.stall} (partial artifacts in {args.out})", file=sys.stderr)
        return EXIT_STALL
    return EXIT_OK


class BadIndex(Exception):
    pass


def _load_index(run_dir: Path) -> dict:
    try:
        index = json.loads((run_dir / "index.json").read_text(encoding="utf-8"))
        for key in ("params", "steps", "case", "grid"):
            index[key]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BadIndex(f"{run_dir}: missing or corrupt index.json ({exc})") from exc
    return index


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    index = _load_index(run_dir)
    out = check_writable(args.out or run_dir / "report")
    try:
        header, rows = io.read_csv(run_dir / "series.csv")
    except (OSError, IndexError) as exc:
        raise BadIndex(f"{run_dir}: unreadable series.csv ({exc})") from exc
    cols = {h: np.array([float(r[i]) for r in rows]) for i, h in enumerate(header)}
    gaps = cols.get("gap", np.array([]))
    if gaps.size:
        io.write_csv(out / "rm_rate.csv", ["log_gap", "log_sup_rm"],
                     zip(np.log(gaps), np.log(cols["sup_rm"])))
        io.write_csv(out / "fiber_rate.csv", ["log_gap", "log_fiber_diam"],
                     zip(np.log(gaps), np.log(cols["fiber_diam"])))
    else:
        io.write_csv(out / "rm_rate.csv", ["log_gap", "log_sup_rm"], [])
        io.write_csv(out / "fiber_rate.csv", ["log_gap", "log_fiber_diam"], [])

    n = int(index["params"]["n"])
    stride = int(index.get("config", {}).get("sample_stride", 16))
    snap = []
    for step in index["steps"]:
        if not step["profiles"]:
            continue
        u, _, _ = io.load_profile(run_dir / step["profiles"][0])
        idx = sample_indices(u.grid.N, stride)
        up, upp = derivatives(u, 1), derivatives(u, 2)
        R = curvature_profile(u, n).R
        snap.extend([step["t"], u.grid.sigma[j], up[j], upp[j], R[j]] for j in idx)
    io.write_csv(out / "snapshots.csv", ["t", "sigma", "u_p", "u_pp", "R"], snap)

    T = float(parse_number(index["case"]["T"]))
    fits = {}
    print(f"{'quantity':<12}{'alpha':>10}{'r2':>10}{'samples':>9}")
    for q in ("sup_rm", "sup_R", "fiber_diam", "sup_H"):
        if q not in cols or not gaps.size:
            continue
        try:
            f = fit_power(gaps, cols[q], (1e-1 * T, 1e-3 * T))
        except (InsufficientSamples, ValueError) as exc:
            print(f"{q:<12}{'-':>10}{'-':>10}{'':>9}  ({exc})")
            continue
        fits[q] = f.as_dict()
        print(f"{q:<12}{f.exponent:>10.4f}{f.r_squared:>10.6f}{f.samples:>9d}")
    partial = bool(index.get("partial", not index.get("complete", True)))
    if partial:
        print("partial run: fits cover the solved range only")
    io.write_json(out / "report.json", {"partial": partial, "fits": fits})
    return EXIT_OK


def _sweep_one(path: str, out_root: str) -> tuple[str, int, str]:
    name = Path(path).stem
    try:
        config = RunConfig.from_file(path)
        result = execute(config)
        write_artifacts(result, Path(out_root) / name)
        return name, EXIT_OK if result.complete else EXIT_STALL, _summary_line(result)
    except InvalidParams as exc:
        return name, EXIT_INVALID, str(exc)
    except PermissionError as exc:
        return name, EXIT_UNWRITABLE, str(exc)


def cmd_sweep(args) -> int:
    check_writable(args.out)
    for path in args.configs:
        if not Path(path).is_file():
            raise UsageError(f"no such config file: {path}")
    codes = []
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        futures = [pool.submit(_sweep_one, path, args.out) for path in args.configs]
        for fut in futures:
            name, code, line = fut.result()
            codes.append(code)
            print(f"{name}: {line}")
    return max(codes) if codes else EXIT_OK


def cmd_check(args) -> int:
    path = Path(args.profile)
    try:
        u, n, extra = io.load_profile(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read profile {path}: {exc}") from exc
    t, a0, b0 = args.t, args.a0, args.b0
    if t is None:
        t = extra.get("t")
    if a0 is None:
        a0 = extra.get("a0")
    if b0 is None:
        b0 = extra.get("b0")
    if None in (t, a0, b0):
        # profiles inside a run directory: look the step up in its index
        run_dir = path.parent.parent
        index = _load_index(run_dir)
        rel = path.relative_to(run_dir).as_posix()
        step = next((s for s in index["steps"] if rel in s["profiles"]), None)
        if step is None:
            raise BadIndex(f"{rel} not listed in {run_dir / 'index.json'}")
        t = step["t"] if t is None else t
        a0 = parse_number(index["params"]["a0"]) if a0 is None else a0
        b0 = parse_number(index["params"]["b0"]) if b0 is None else b0
    if args.initial:
        u0, _, _ = io.load_profile(args.initial)
    else:
        u0 = reference_profile(float(a0), float(b0), u.k, u.grid)
    calabi = validate_calabi(u)
    scal = scalar_cross_checks(u, u0, float(t), n, tol=args.tol)
    ok = calabi.passed and scal.passed
    if args.json:
        print(json.dumps({"calabi": calabi.as_dict(), "scalar": scal.summary(), "passed": ok},
                         default=float))
    else:
        print(f"Calabi conditions: {'ok' if calabi.passed else 'FAILED'} "
              f"(min u'={calabi.min_up:.6g}, min q={calabi.min_q:.6g}, |u(0)|={calabi.normalization_residual:.2e})")
        print(f"scalar routes: {'ok' if scal.passed else 'FAILED'} "
              f"(max rel {max(scal.max_rel_12, scal.max_rel_13, scal.max_rel_23):.2e}, tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {"classify": cmd_classify, "run": cmd_run, "report": cmd_report,
            "sweep": cmd_sweep, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvalidParams as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PermissionError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    except BadIndex as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BAD_INDEX


if __name__ == "__main__":
    sys.exit(main())
