"""Fourth-order finite-difference operators on mapped grids of [0, 1]."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

ACCURACY = 4


def fornberg_weights(offsets, order: int, x0: float = 0.0) -> np.ndarray:
    """Weights w with f^(order)(x0) ~ sum_j w_j f(offsets_j) (Fornberg 1988)."""
    x = np.asarray(offsets, dtype=float)
    m = len(x)
    if order >= m:
        raise ValueError("need more points than the derivative order")
    c = np.zeros((m, order + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for d in range(mn, 0, -1):
                    c[i, d] = c1 * (d * c[i - 1, d - 1] - c5 * c[i - 1, d]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for d in range(mn, 0, -1):
                c[j, d] = (c4 * c[j, d] - d * c[j, d - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _stencil_rows(x: np.ndarray, order: int, spread: int = 1):
    """Yield (row, columns, weights) for each node of the sorted nodes x.

    spread > 1 builds the stencils from every spread-th node, trading a
    larger truncation constant for spread^order less rounding noise.
    """
    N = len(x)
    half = (order + 1) // 2 + 1  # centred half width giving 4th order
    width = 2 * half + 1
    one_sided = max(order + ACCURACY, width)
    reach = spread * half
    for i in range(N):
        if reach <= i < N - reach:
            cols = i + spread * np.arange(-half, half + 1)
        elif i < reach:
            cols = spread * np.arange(one_sided)
        else:
            cols = N - 1 - spread * np.arange(one_sided)[::-1]
        yield i, cols, fornberg_weights(x[cols], order, x[i])


def _half_point(beta: float) -> float:
    """xi at which expm1(beta xi)/expm1(beta) equals 1/2."""
    return math.log1p(0.5 * math.expm1(beta)) / beta


def stretched_nodes(N: int, stretch: float = 0.0, cluster: str = "both") -> np.ndarray:
    """N nodes on [0, 1], uniform when stretch == 0.

    cluster="both" packs nodes at both ends with a tanh map that is odd about
    1/2.  cluster="left" uses sigma = expm1(beta xi)/expm1(beta), geometric
    near sigma = 0 (equispaced in log sigma) and coarser near 1; beta is
    nudged from stretch so that 1/2 falls exactly on a node.
    """
    xi = np.linspace(0.0, 1.0, N)
    if stretch == 0.0:
        return xi
    if cluster == "both":
        x = 0.5 + 0.5 * np.tanh(stretch * (2.0 * xi - 1.0)) / np.tanh(stretch)
        m = N // 2
    elif cluster == "left":
        m = int(round(_half_point(stretch) * (N - 1)))
        target = m / (N - 1)
        beta = brentq(lambda b: _half_point(b) - target, 1e-8, 200.0, xtol=1e-15)
        x = np.expm1(beta * xi) / math.expm1(beta)
    else:
        raise ValueError(f"unknown cluster mode {cluster!r}")
    x[0], x[-1] = 0.0, 1.0
    x[m] = 0.5
    return x


@lru_cache(maxsize=32)
def diff_matrix(N: int, order: int, stretch: float = 0.0, cluster: str = "both",
                spread: int = 1) -> sp.csr_matrix:
    """Sparse d^order/dsigma^order on the nodes stretched_nodes(N, stretch, cluster)."""
    if N < spread * (2 * ACCURACY + 1):
        raise ValueError(f"grid too small for 4th-order stencils: N={N}")
    x = stretched_nodes(N, stretch, cluster)
    if stretch == 0.0:
        # uniform: one set of weights on integer offsets, scaled once
        h = 1.0 / (N - 1)
        x = np.arange(N, dtype=float)
    rows, cols, vals = [], [], []
    for i, c, w in _stencil_rows(x, order, spread):
        rows.extend([i] * len(c))
        cols.extend(c)
        vals.extend(w)
    vals = np.asarray(vals)
    if stretch == 0.0:
        vals = vals / h**order
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    mat.sort_indices()
    return mat


@lru_cache(maxsize=32)
def abs_diff_matrix(N: int, order: int, stretch: float = 0.0,
                    cluster: str = "both", spread: int = 1) -> sp.csr_matrix:
    """Entrywise |weights|, for rounding-error bounds."""
    return abs(diff_matrix(N, order, stretch, cluster, spread))
