"""Discrete osmosis operator ``A = A1 + A2`` on a staggered grid.

Each axis contributes a three-point stencil built from face fluxes

    F = (u2 - u1) / h - d * (u2 + u1) / 2,     (A u)_p = (F_out - F_in) / h,

with no flux through faces on the domain boundary. Writing the operator as a
divergence of face fluxes makes every column sum vanish identically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .drift import DriftField
from .grid import DimensionMismatch, ScalarField

__all__ = [
    "AxisStencil",
    "Stencil",
    "LineSystem",
    "stencil",
    "face_flux",
    "apply_axis",
    "apply_A",
    "apply_A_transpose",
    "assemble_lines",
    "column_sum_defect",
    "offdiagonals_nonnegative",
    "to_sparse",
    "is_irreducible",
]

AXES = {"x": 1, "y": 0}


def _axis(axis) -> int:
    if axis in AXES:
        return AXES[axis]
    if axis in (0, 1):
        return int(axis)
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def _face_drift(d: DriftField, ax: int) -> np.ndarray:
    return d.d1 if ax == 1 else d.d2


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=np.float64)


def face_flux(u: np.ndarray, d: DriftField, axis) -> np.ndarray:
    """Flux ``(u2 - u1)/h - d (u2 + u1)/2`` on the interior faces of one axis."""
    ax = _axis(axis)
    h = d.h
    if ax == 1:
        lo, hi = u[:, :-1], u[:, 1:]
    else:
        lo, hi = u[:-1, :], u[1:, :]
    return (hi - lo) / h - _face_drift(d, ax) * (hi + lo) * 0.5


def apply_axis(u, d: DriftField, axis) -> np.ndarray:
    """``A1 u`` (axis ``'x'``) or ``A2 u`` (axis ``'y'``) as a plain array."""
    u = _values(u)
    if u.shape != d.shape:
        raise DimensionMismatch(f"field {u.shape} and drift {d.shape} differ")
    ax = _axis(axis)
    flux = face_flux(u, d, ax) / d.h
    out = np.zeros_like(u)
    if ax == 1:
        out[:, :-1] += flux
        out[:, 1:] -= flux
    else:
        out[:-1, :] += flux
        out[1:, :] -= flux
    return out


def apply_A(u: ScalarField, d: DriftField) -> ScalarField:
    """Matrix-free ``(A1 + A2) u``."""
    a = _values(u)
    return ScalarField(apply_axis(a, d, "x") + apply_axis(a, d, "y"), d.h)


@dataclass(frozen=True)
class AxisStencil:
    """Per-pixel coefficients of one axis operator.

    ``prev`` multiplies the neighbour at index ``k-1`` along the axis, ``next``
    the neighbour at ``k+1``; both are zero where the neighbour is missing.
    """

    axis: int
    prev: np.ndarray
    center: np.ndarray
    next: np.ndarray


@dataclass(frozen=True)
class Stencil:
    x: AxisStencil
    y: AxisStencil

    @property
    def diagonal(self) -> np.ndarray:
        return self.x.center + self.y.center


def _axis_stencil(d: DriftField, ax: int) -> AxisStencil:
    H, W = d.shape
    h = d.h
    df = _face_drift(d, ax)
    inv = 1.0 / (h * h)
    # coefficient of the upper pixel in its lower neighbour's row, and vice versa
    to_upper = inv - df / (2 * h)
    to_lower = inv + df / (2 * h)
    prev = np.zeros((H, W))
    nxt = np.zeros((H, W))
    center = np.zeros((H, W))
    if ax == 1:
        nxt[:, :-1] = to_upper
        prev[:, 1:] = to_lower
        center[:, :-1] -= to_lower
        center[:, 1:] -= to_upper
    else:
        nxt[:-1, :] = to_upper
        prev[1:, :] = to_lower
        center[:-1, :] -= to_lower
        center[1:, :] -= to_upper
    return AxisStencil(ax, prev, center, nxt)


def stencil(d: DriftField) -> Stencil:
    """Explicit five-point coefficients of ``A`` for the drift ``d``."""
    return Stencil(_axis_stencil(d, 1), _axis_stencil(d, 0))


def _transpose_axis(w: np.ndarray, s: AxisStencil) -> np.ndarray:
    out = s.center * w
    if s.axis == 1:
        out[:, :-1] += s.prev[:, 1:] * w[:, 1:]
        out[:, 1:] += s.next[:, :-1] * w[:, :-1]
    else:
        out[:-1, :] += s.prev[1:, :] * w[1:, :]
        out[1:, :] += s.next[:-1, :] * w[:-1, :]
    return out


def apply_A_transpose(w, op: DriftField | Stencil) -> np.ndarray:
    """``A^T w`` from the stencil coefficients."""
    s = stencil(op) if isinstance(op, DriftField) else op
    w = _values(w)
    return _transpose_axis(w, s.x) + _transpose_axis(w, s.y)


def column_sum_defect(op: DriftField | Stencil) -> float:
    """Largest absolute column sum of ``A``, i.e. ``max |A^T 1|``."""
    s = stencil(op) if isinstance(op, DriftField) else op
    ones = np.ones_like(s.x.center)
    return float(np.abs(apply_A_transpose(ones, s)).max())


def offdiagonals_nonnegative(d: DriftField) -> bool:
    s = stencil(d)
    return all(bool(np.all(a >= 0)) for a in (s.x.prev, s.x.next, s.y.prev, s.y.next))


def to_sparse(d: DriftField) -> sparse.csr_matrix:
    """Assemble ``A`` as a sparse matrix (row-major pixel ordering). Diagnostics only."""
    H, W = d.shape
    s = stencil(d)
    idx = np.arange(H * W).reshape(H, W)
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [s.diagonal.ravel()]
    for coef, shift in ((s.x.prev, (0, -1)), (s.x.next, (0, 1)), (s.y.prev, (-1, 0)), (s.y.next, (1, 0))):
        jj, ii = np.nonzero(coef)
        rows.append(idx[jj, ii])
        cols.append(idx[jj + shift[0], ii + shift[1]])
        vals.append(coef[jj, ii])
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(H * W, H * W))


def is_irreducible(d: DriftField) -> bool:
    """True when the coupling graph of ``A`` is strongly connected."""
    A = to_sparse(d)
    A.setdiag(0)
    A.eliminate_zeros()
    n, _ = csgraph.connected_components(A, directed=True, connection="strong")
    return n == 1


@dataclass(frozen=True)
class LineSystem:
    """Batch of tridiagonal systems ``I - tau * A_axis``, one per grid line.

    Coefficients are kept in grid orientation: for ``axis='x'`` the lines are
    rows and ``lower``/``upper`` have shape ``(H, W-1)``; for ``axis='y'`` the
    lines are columns and they have shape ``(H-1, W)``. ``lower[k-1]`` is the
    entry in row ``k``, column ``k-1`` of a line matrix; ``upper[k]`` sits at
    row ``k``, column ``k+1``.
    """

    axis: str
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    tau: float

    @property
    def n_lines(self) -> int:
        return self.diag.shape[0] if self.axis == "x" else self.diag.shape[1]

    @property
    def line_length(self) -> int:
        return self.diag.shape[1] if self.axis == "x" else self.diag.shape[0]

    def line(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.axis == "x":
            return self.lower[k], self.diag[k], self.upper[k]
        return self.lower[:, k], self.diag[:, k], self.upper[:, k]

    def dense(self, k: int) -> np.ndarray:
        lo, di, up = self.line(k)
        return np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)


def assemble_lines(d: DriftField, axis, tau: float) -> LineSystem:
    """Tridiagonal factors of ``I - tau * A1`` (``axis='x'``) or ``I - tau * A2``."""
    if not tau > 0:
        raise ValueError(f"time step must be positive, got {tau}")
    ax = _axis(axis)
    s = _axis_stencil(d, ax)
    if ax == 1:
        lower, upper = -tau * s.prev[:, 1:], -tau * s.next[:, :-1]
    else:
        lower, upper = -tau * s.prev[1:, :], -tau * s.next[:-1, :]
    diag = 1.0 - tau * s.center
    return LineSystem("x" if ax == 1 else "y", lower, diag, upper, float(tau))
