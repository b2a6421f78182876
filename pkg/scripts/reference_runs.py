"""Solve the three reference surfaces and write their artifacts under runs/.

    python scripts/reference_runs.py [--out runs] [-N 2049]
"""
from __future__ import annotations

import argparse
import logging

from continuity_lab.runner import RunConfig, execute, write_artifacts

CASES = {
    "case_i": dict(n=3, k=1, a0=2, b0=3),
    "case_ii": dict(n=2, k=1, a0=1, case_ii=True),
    "case_iii": dict(n=2, k=1, a0=1, b0=4),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs")
    ap.add_argument("-N", type=int, default=2049)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for name, params in CASES.items():
        result = execute(RunConfig(N=args.N, **params))
        write_artifacts(result, f"{args.out}/{name}")
        v = result.verdict
        fits = "  ".join(f"{q}={f.exponent:.3f}" for q, f in v.fits.items())
        worst = max(max(c["max_rel_rvu_trace"], c["max_rel_rvu_vcontract"], c["max_rel_trace_vcontract"])
                    for c in result.scalar_checks)
        print(f"{name:9s} Case {v.case_label:3s} {v.status:12s} {result.wall_time:5.1f}s  "
              f"scalar routes {worst:.1e}  {fits}")


if __name__ == "__main__":
    main()
