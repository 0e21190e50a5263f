"""Right-preconditioned restarted GMRES.

With right preconditioning the Arnoldi residual estimate is the true residual
of the unpreconditioned system, so the stopping test matches the contract of
the implicit stepper. Starting from ``x0`` and using operators with unit
column sums keeps ``sum(x)`` at ``sum(x0) + sum(b - A x0)`` up to rounding.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

__all__ = ["gmres"]

Op = Callable[[np.ndarray], np.ndarray]


def gmres(matvec: Op, b: np.ndarray, x0: np.ndarray, tol: float, precond: Op | None = None,
          restart: int = 100, max_iter: int = 3000):
    """Iterate until ``|b - A x|_2 <= tol`` (absolute) or ``max_iter`` products.

    Returns ``(x, residual_norm, iterations)``; the residual is recomputed
    explicitly at the end of each cycle.
    """
    precond = precond or (lambda v: v)
    n = b.shape[0]
    x = x0.copy()
    used = 0
    r = b - matvec(x)
    beta = np.linalg.norm(r)
    while beta > tol and used < max_iter:
        m = min(restart, max_iter - used)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_end = 0
        for k in range(m):
            Z[k] = precond(V[k])
            w = matvec(Z[k])
            used += 1
            # classical Gram-Schmidt, applied twice
            h = V[: k + 1] @ w
            w -= h @ V[: k + 1]
            h2 = V[: k + 1] @ w
            w -= h2 @ V[: k + 1]
            H[: k + 1, k] = h + h2
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            rho = np.hypot(H[k, k], H[k + 1, k])
            if rho == 0:
                break
            cs[k], sn[k] = H[k, k] / rho, H[k + 1, k] / rho
            H[k, k] = rho
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_end = k + 1
            if abs(g[k + 1]) <= tol:
                break
        if k_end == 0:
            break
        y = solve_triangular(H[:k_end, :k_end], g[:k_end])
        x += y @ Z[:k_end]
        r = b - matvec(x)
        new_beta = np.linalg.norm(r)
        if new_beta >= beta:
            beta = new_beta
            break  # a full cycle without progress: stagnation
        beta = new_beta
    return x, float(beta), used
