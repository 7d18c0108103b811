"""Dense direct least squares: the reference the iterative fits are checked against.

Everything here is deliberately simple and quadratic-or-worse in size. Basis
values come from the textbook recursive definition rather than the
vectorized evaluator in :mod:`splinefit.basis`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from splinefit.basis import FloatArray, KnotVector, ParamGrid
from splinefit.errors import OracleSizeError, OutOfDomainError, RankDeficientError

MAX_ROWS = 10_000
MAX_COLS = 2_500


@dataclass(frozen=True)
class DenseCollocation:
    """Full collocation matrix, rows over data (row-major), columns over controls (row-major)."""

    matrix: FloatArray
    data_shape: tuple[int, int]
    net_shape: tuple[int, int]


def cox_de_boor(knots, i: int, p: int, t: float) -> float:
    """Value of basis function ``i`` of degree ``p`` by direct recursion."""
    knots = np.asarray(knots, dtype=np.float64)
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        # closed right end: the last nonempty span owns t == knots[-1]
        if t == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
            return 1.0
        return 0.0
    out = 0.0
    den = knots[i + p] - knots[i]
    if den > 0:
        out += (t - knots[i]) / den * cox_de_boor(knots, i, p - 1, t)
    den = knots[i + p + 1] - knots[i + 1]
    if den > 0:
        out += (knots[i + p + 1] - t) / den * cox_de_boor(knots, i + 1, p - 1, t)
    return out


def _dense_1d(kv: KnotVector, params) -> FloatArray:
    lo, hi = kv.domain
    out = np.zeros((len(params), kv.num_basis))
    for r, t in enumerate(params):
        if not lo <= t <= hi:
            raise OutOfDomainError(f"parameter {t!r} outside knot domain [{lo}, {hi}]")
        for i in range(kv.num_basis):
            out[r, i] = cox_de_boor(kv.knots, i, kv.degree, float(t))
    return out


def assemble_dense(kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> DenseCollocation:
    rows, cols = grid.shape
    m, n = kv_u.num_basis, kv_v.num_basis
    if rows * cols > MAX_ROWS or m * n > MAX_COLS:
        raise OracleSizeError(
            f"dense oracle capped at {MAX_ROWS} x {MAX_COLS}, requested {rows * cols} x {m * n}"
        )
    Au = _dense_1d(kv_u, grid.u)
    Av = _dense_1d(kv_v, grid.v)
    A = np.einsum("ri,cj->rcij", Au, Av).reshape(rows * cols, m * n)
    return DenseCollocation(A, (rows, cols), (m, n))


def cholesky(G) -> FloatArray:
    """Lower-triangular ``L`` with ``L L^T = G``.

    Raises :class:`RankDeficientError` when a pivot falls below
    ``n * eps * max(diag(G))``, i.e. ``G`` is semidefinite to working precision.
    """
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError(f"matrix must be square, got {G.shape}")
    L = np.zeros_like(G)
    threshold = n * np.finfo(np.float64).eps * max(float(np.max(np.diag(G), initial=0.0)), 0.0)
    for j in range(n):
        pivot = G[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > threshold:
            raise RankDeficientError(f"Gram matrix is not positive definite (pivot {j} = {pivot:.3e})")
        L[j, j] = math.sqrt(pivot)
        L[j + 1 :, j] = (G[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _cholesky_solve(L: FloatArray, b: FloatArray) -> FloatArray:
    n = L.shape[0]
    y = np.zeros_like(b)
    for i in range(n):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.zeros_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1 :, i] @ x[i + 1 :]) / L[i, i]
    return x


def normal_solve(A: DenseCollocation, data) -> FloatArray:
    """Unique least squares control net, solving ``A^T A p = A^T q`` for each coordinate."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3 or data.shape[:2] != A.data_shape:
        raise ValueError(f"data shape {data.shape} does not match collocation rows {A.data_shape}")
    q = data.reshape(-1, data.shape[2])
    M = A.matrix
    L = cholesky(M.T @ M)
    p = _cholesky_solve(L, M.T @ q)
    return p.reshape(*A.net_shape, data.shape[2])


def power_iteration(G, iterations: int = 200, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of a symmetric PSD matrix, started from the normalized all-ones vector."""
    G = np.asarray(G, dtype=np.float64)
    x = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
    lam = 0.0
    for _ in range(iterations):
        y = G @ x
        new = float(x @ y)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def gram_spectrum(A) -> tuple[float, bool]:
    """``(lambda_max, positive_definite)`` for the Gram matrix ``A^T A``."""
    M = A.matrix if isinstance(A, DenseCollocation) else np.asarray(A, dtype=np.float64)
    G = M.T @ M
    try:
        cholesky(G)
        definite = True
    except RankDeficientError:
        definite = False
    return power_iteration(G), definite


def _supported_1d(kv: KnotVector, params) -> bool:
    p, U = kv.degree, kv.knots
    params = np.asarray(params, dtype=np.float64)
    lo, hi = kv.domain
    for i in range(kv.num_basis):
        a, b = U[i], U[i + p + 1]
        inside = (params > a) & (params < b)
        # clamped end bases do not vanish at the domain boundary
        if U[i + p] == lo:
            inside |= params == lo
        if U[i + 1] == hi:
            inside |= params == hi
        if not np.any(inside):
            return False
    return True


def schoenberg_whitney_check(kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> bool:
    """True iff every basis function in each direction is nonzero at some parameter."""
    return _supported_1d(kv_u, grid.u) and _supported_1d(kv_v, grid.v)
