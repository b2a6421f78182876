"""Independent solve of the radial continuity equation by Chebyshev collocation.

Shares no code with the package: psi is a Chebyshev series in x = 2 sigma - 1,
the equation is evaluated in rho at interior Chebyshev-Gauss points, and
Newton's method with the exact collocation Jacobian solves for the series
coefficients and the constant c.  Prints the values frozen into tests/test_oracle_values.py.

    python scripts/chebyshev_oracle.py            # Case I (3, 1, 2, 3)
    python scripts/chebyshev_oracle.py --M 96     # check spectral convergence
"""
from __future__ import annotations

import argparse
import json

import numpy as np
from numpy.polynomial import chebyshev as C


def slopes(n, k, a0, b0, t):
    return a0 + (k - n) * t, b0 - (k + n) * t


def u_hat(rho, a, b, k):
    return a * rho + (b - a) / k * np.logaddexp(0.0, k * rho) - (b - a) * np.log(2.0) / k


def u_hat_derivs(rho, a, b, k):
    sig = 0.5 * (1.0 + np.tanh(0.5 * k * rho))
    return a + (b - a) * sig, k * (b - a) * sig * (1.0 - sig)


class Series:
    """psi(sigma) from Chebyshev coefficients, with sigma-derivatives."""

    def __init__(self, coef):
        self.c0 = coef
        self.c1 = C.chebder(coef) * 2.0
        self.c2 = C.chebder(coef, 2) * 4.0

    def __call__(self, sig, order=0):
        return C.chebval(2.0 * sig - 1.0, (self.c0, self.c1, self.c2)[order])


def potential(rho, coef, a, b, k):
    """u, u', u'' at rho for u = u_hat(a, b) + psi."""
    sig = 0.5 * (1.0 + np.tanh(0.5 * k * rho))
    ds = k * sig * (1.0 - sig)
    dds = k * ds * (1.0 - 2.0 * sig)
    psi = Series(coef)
    uh1, uh2 = u_hat_derivs(rho, a, b, k)
    u = u_hat(rho, a, b, k) + psi(sig)
    u1 = uh1 + ds * psi(sig, 1)
    u2 = uh2 + dds * psi(sig, 1) + ds * ds * psi(sig, 2)
    return u, u1, u2


def solve(n, k, a0, b0, t, M, start=None, tol=1e-13, max_iter=50):
    """Newton on (coefficients, c) with the exact collocation Jacobian."""
    a, b = slopes(n, k, a0, b0, t)
    x = np.cos(np.pi * (np.arange(M) + 0.5) / M)
    sig = 0.5 * (1.0 + x)
    rho = (np.log(sig) - np.log1p(-sig)) / k
    ds = k * sig * (1.0 - sig)
    dds = k * ds * (1.0 - 2.0 * sig)
    eye = np.eye(M)
    V0 = C.chebvander(x, M - 1)
    V1 = C.chebvander(x, M - 2) @ (C.chebder(eye, axis=0) * 2.0)
    V2 = C.chebvander(x, M - 3) @ (C.chebder(eye, 2, axis=0) * 4.0)
    mid = C.chebvander(np.array([0.0]), M - 1)[0]
    u0 = u_hat(rho, a0, b0, k)

    def equations(z):
        coef, c = z[:-1], z[-1]
        u, u1, u2 = potential(rho, coef, a, b, k)
        F = u - u0 - t * (n - 1) * np.log(u1) - t * np.log(u2) + t * n * rho - c
        return np.append(F, mid @ coef), u1, u2

    z = np.zeros(M + 1) if start is None else start.copy()
    for _ in range(max_iter):
        G, u1, u2 = equations(z)
        if np.max(np.abs(G)) < tol:
            break
        J = np.zeros((M + 1, M + 1))
        J[:M, :M] = (V0 - t * (n - 1) * ds[:, None] * V1 / u1[:, None]
                     - t * (dds[:, None] * V1 + (ds * ds)[:, None] * V2) / u2[:, None])
        J[:M, M] = -1.0
        J[M, :M] = mid
        step = np.linalg.solve(J, -G)
        lam = 1.0
        while True:
            _, v1, v2 = equations(z + lam * step)
            if np.all(v1 > 0) and np.all(v2 > 0):
                break
            lam *= 0.5
        z = z + lam * step
    res = float(np.max(np.abs(equations(z)[0])))
    if res > 1e-11:
        raise RuntimeError(f"no convergence at t={t} (residual {res:.2e})")
    return a, b, z[:-1], z[-1], res


def solve_along(n, k, a0, b0, t, M, steps=10):
    """Warm-started through t/steps, 2t/steps, ..., t."""
    z = None
    for j in range(1, steps + 1):
        a, b, coef, c, res = solve(n, k, a0, b0, t * j / steps, M, z)
        z = np.append(coef, c)
    return a, b, coef, c, res


def scalar_at_zero(n, k, a0, b0, t, coef, a, b):
    """R at rho = 0 from the trace identity (tr_omega omega_0 - n)/t."""
    _, u1, u2 = potential(np.array([0.0]), coef, a, b, k)
    w1, w2 = u_hat_derivs(np.array([0.0]), a0, b0, k)
    return float(((w2 / u2 + (n - 1) * w1 / u1 - n) / t)[0])


def report(n, k, a0, b0, t, M):
    a, b, coef, c, res = solve_along(n, k, a0, b0, t, M)
    psi = Series(coef)
    _, u1, u2 = potential(np.array([0.0]), coef, a, b, k)
    probes = [0.0, 0.1, 0.25, 0.75, 0.9, 1.0]
    return {
        "params": [n, k, a0, b0], "t": t, "M": M, "residual": res, "c": float(c),
        "up_mid": float(u1[0]), "upp_mid": float(u2[0]),
        "psi": {str(s): float(psi(np.array([s]))[0]) for s in probes},
        "R_mid": scalar_at_zero(n, k, a0, b0, t, coef, a, b),
        "tail": float(np.max(np.abs(coef[-4:]))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--params", type=float, nargs=4, default=[3, 1, 2, 3], metavar=("n", "k", "a0", "b0"))
    ap.add_argument("--times", type=float, nargs="+", default=[0.05, 0.25])
    ap.add_argument("--M", type=int, default=64)
    ap.add_argument("--dump", help="also write the series coefficients of every time to this JSON file")
    args = ap.parse_args()
    n, k = int(args.params[0]), int(args.params[1])
    a0, b0 = args.params[2], args.params[3]
    dumped = []
    for t in args.times:
        print(json.dumps(report(n, k, a0, b0, t, args.M), indent=2))
        if args.dump:
            a, b, coef, c, res = solve_along(n, k, a0, b0, t, args.M)
            dumped.append({"t": t, "a": a, "b": b, "c": float(c), "coef": [float(x) for x in coef]})
    if args.dump:
        doc = {"params": [n, k, a0, b0], "variable": "x = 2 sigma - 1", "solutions": dumped}
        with open(args.dump, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)


if __name__ == "__main__":
    main()
