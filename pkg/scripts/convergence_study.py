"""Grid studies.

refine : Case I at t = T/2 on N = 65 ... 4097, successive differences and
         observed order, plus the first-identity residual.
stretch: Case III over the clustering strength of the left-packed grid,
         reporting the identity residual and scalar-route spread at a few gaps.

    python scripts/convergence_study.py refine
    python scripts/convergence_study.py stretch --betas 0 4 6 8 9.5 11
"""
from __future__ import annotations

import argparse
import math

import numpy as np

from continuity_lab.cohomology import SurfaceParams, class_at, classify
from continuity_lab.profile import Grid, RadialProfile, reference_profile
from continuity_lab.runner import RunConfig, execute
from continuity_lab.solver import SolverConfig, first_identity_residual, solve


def refine(sizes):
    P = SurfaceParams(3, 1, 2, 3)
    t = float(classify(P).T) / 2
    cls = class_at(P, t)
    prev, prev_diff = None, None
    print(f"{'N':>6} {'sup diff':>10} {'order':>6} {'u1':>9} {'iters':>5}")
    for N in sizes:
        g = Grid(N, 1)
        u0 = reference_profile(2.0, 3.0, 1, g)
        u, info = solve(RadialProfile(g, float(cls.a), float(cls.b), np.zeros(N)), u0, t, 3, SolverConfig())
        u1 = float(np.max(np.abs(first_identity_residual(u, u0, t, 3))))
        diff = order = math.nan
        if prev is not None:
            diff = float(np.max(np.abs(prev.psi - u.psi[::2])))
            if prev_diff:
                order = math.log2(prev_diff / diff)
        print(f"{N:6d} {diff:10.2e} {order:6.2f} {u1:9.1e} {info.iterations:5d}")
        prev, prev_diff = u, diff if not math.isnan(diff) else None


def stretch(betas, N, report_gaps):
    print(f"{'beta':>5} {'status':>12}  " + "  ".join(f"u1@{g:.0e} R@{g:.0e}" for g in report_gaps))
    for beta in betas:
        cfg = RunConfig(n=2, k=1, a0=1, b0=4, N=N, stretch=beta, cluster="left" if beta else "both")
        run = execute(cfg)
        T = float(run.report.T)
        cells = []
        for gap in report_gaps:
            i = int(np.argmin([abs((T - e.t) - gap * T) for e in run.emitted]))
            e = run.emitted[i]
            u1 = float(np.max(np.abs(first_identity_residual(e.profile, run.u0, e.t, 2))))
            chk = run.scalar_checks[i]
            worst = max(chk["max_rel_rvu_trace"], chk["max_rel_rvu_vcontract"], chk["max_rel_trace_vcontract"])
            cells.append(f"{u1:8.1e} {worst:7.1e}")
        status = run.verdict.status if run.verdict else "none"
        print(f"{beta:5.1f} {status:>12}  " + "  ".join(cells))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("refine")
    r.add_argument("--sizes", type=int, nargs="+", default=[65, 129, 257, 513, 1025, 2049, 4097])
    s = sub.add_parser("stretch")
    s.add_argument("--betas", type=float, nargs="+", default=[0.0, 4.0, 6.0, 8.0, 9.5, 11.0])
    s.add_argument("-N", type=int, default=2049)
    s.add_argument("--gaps", type=float, nargs="+", default=[1e-1, 1e-2, 2e-3, 1e-3])
    args = ap.parse_args()
    if args.cmd == "refine":
        refine(args.sizes)
    else:
        stretch(args.betas, args.N, args.gaps)


if __name__ == "__main__":
    main()
