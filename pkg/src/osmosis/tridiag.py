"""Thomas elimination for single and batched non-symmetric tridiagonal systems.

No pivoting: the line matrices built from ``I - tau * A_axis`` are column
diagonally dominant whenever ``|d| h <= 2``. A vanishing or non-finite pivot is
reported as :class:`ZeroPivotError`.
"""
from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# TBB on this platform tends to be too old; workqueue is always available.
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"

__all__ = ["ZeroPivotError", "solve_tridiagonal", "solve_rows", "solve_cols", "set_threads"]

_COL_BLOCK = 64


class ZeroPivotError(ArithmeticError):
    pass


def set_threads(n: int | None) -> int:
    """Cap the worker count of the batched kernels; returns the active count."""
    if n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve one tridiagonal system; ``lower[k-1]`` is entry ``(k, k-1)``."""
    lower = np.asarray(lower, dtype=np.float64)
    diag = np.asarray(diag, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = diag.shape[0]
    if n < 2:
        raise ValueError("line length must be >= 2")
    if lower.shape != (n - 1,) or upper.shape != (n - 1,) or rhs.shape != (n,):
        raise ValueError("inconsistent tridiagonal shapes")
    x = np.empty(n)
    if _solve_line(lower, diag, upper, rhs, x, np.empty(n)):
        raise ZeroPivotError("zero pivot in tridiagonal elimination")
    return x


@njit(cache=True)
def _solve_line(lo, di, up, r, x, cp):
    n = di.shape[0]
    m = di[0]
    if m == 0.0 or not np.isfinite(m):
        return True
    cp[0] = up[0] / m
    x[0] = r[0] / m
    for k in range(1, n):
        m = di[k] - lo[k - 1] * cp[k - 1]
        if m == 0.0 or not np.isfinite(m):
            return True
        if k < n - 1:
            cp[k] = up[k] / m
        x[k] = (r[k] - lo[k - 1] * x[k - 1]) / m
    for k in range(n - 2, -1, -1):
        x[k] -= cp[k] * x[k + 1]
    return False


@njit(parallel=True, cache=True)
def _rows_kernel(lo, di, up, r, x):
    H, W = di.shape
    bad = np.zeros(H, dtype=np.bool_)
    for j in prange(H):
        cp = np.empty(W)
        bad[j] = _solve_line(lo[j], di[j], up[j], r[j], x[j], cp)
    return bad.any()


@njit(parallel=True, cache=True)
def _cols_kernel(lo, di, up, r, x):
    H, W = di.shape
    nblk = (W + _COL_BLOCK - 1) // _COL_BLOCK
    bad = np.zeros(nblk, dtype=np.bool_)
    for b in prange(nblk):
        i0 = b * _COL_BLOCK
        i1 = min(W, i0 + _COL_BLOCK)
        cp = np.empty((H, i1 - i0))
        for i in range(i0, i1):
            m = di[0, i]
            if m == 0.0 or not np.isfinite(m):
                bad[b] = True
            cp[0, i - i0] = up[0, i] / m
            x[0, i] = r[0, i] / m
        for k in range(1, H):
            for i in range(i0, i1):
                m = di[k, i] - lo[k - 1, i] * cp[k - 1, i - i0]
                if m == 0.0 or not np.isfinite(m):
                    bad[b] = True
                if k < H - 1:
                    cp[k, i - i0] = up[k, i] / m
                x[k, i] = (r[k, i] - lo[k - 1, i] * x[k - 1, i]) / m
        for k in range(H - 2, -1, -1):
            for i in range(i0, i1):
                x[k, i] -= cp[k, i - i0] * x[k + 1, i]
    return bad.any()


def solve_rows(lower, diag, upper, rhs) -> np.ndarray:
    """Solve one system per row of ``rhs`` (shape ``(H, W)``)."""
    x = np.empty_like(rhs, dtype=np.float64)
    if _rows_kernel(np.ascontiguousarray(lower), np.ascontiguousarray(diag),
                    np.ascontiguousarray(upper), np.ascontiguousarray(rhs, dtype=np.float64), x):
        raise ZeroPivotError("zero pivot while solving x-lines")
    return x


def solve_cols(lower, diag, upper, rhs) -> np.ndarray:
    """Solve one system per column of ``rhs`` (shape ``(H, W)``)."""
    x = np.empty_like(rhs, dtype=np.float64)
    if _cols_kernel(np.ascontiguousarray(lower), np.ascontiguousarray(diag),
                    np.ascontiguousarray(upper), np.ascontiguousarray(rhs, dtype=np.float64), x):
        raise ZeroPivotError("zero pivot while solving y-lines")
    return x
