"""Staggered drift fields: the canonical ``d = grad log v`` and its gating."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import DimensionMismatch, LabelMap, ScalarField

__all__ = [
    "DriftField",
    "canonical_drift",
    "zero_drift",
    "gate_faces",
    "gate_mask_boundary",
    "gate_label_seams",
    "label_seam_faces",
]


@dataclass(frozen=True)
class DriftField:
    """Drift components stored on cell faces.

    ``d1[j, i]`` lives on the x-face between pixels ``(j, i)`` and ``(j, i+1)``,
    shape ``(H, W-1)``. ``d2[j, i]`` lives on the y-face between ``(j, i)`` and
    ``(j+1, i)``, shape ``(H-1, W)``. Faces on the domain boundary are not
    stored; they carry no flux.
    """

    d1: np.ndarray
    d2: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        d1 = np.array(self.d1, dtype=np.float64, copy=True)
        d2 = np.array(self.d2, dtype=np.float64, copy=True)
        if d1.ndim != 2 or d2.ndim != 2:
            raise ValueError("drift components must be 2D")
        H, W = d1.shape[0], d1.shape[1] + 1
        if d2.shape != (H - 1, W):
            raise DimensionMismatch(f"d1 {d1.shape} and d2 {d2.shape} do not describe one grid")
        if H < 2 or W < 2:
            raise ValueError("drift grid needs width and height >= 2")
        if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise ValueError("drift entries must be finite")
        d1.flags.writeable = False
        d2.flags.writeable = False
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)
        object.__setattr__(self, "h", float(self.h))

    @property
    def shape(self) -> tuple[int, int]:
        """Pixel grid shape ``(H, W)``."""
        return self.d1.shape[0], self.d2.shape[1]

    def max_abs_scaled(self) -> float:
        """``max |d| * h`` over all faces; off-diagonals stay non-negative while this is <= 2."""
        m = max(np.abs(self.d1).max(initial=0.0), np.abs(self.d2).max(initial=0.0))
        return float(m * self.h)


def zero_drift(shape: tuple[int, int], h: float = 1.0) -> DriftField:
    H, W = shape
    return DriftField(np.zeros((H, W - 1)), np.zeros((H - 1, W)), h)


def canonical_drift(v: ScalarField) -> DriftField:
    """Drift for which ``v`` is an exact fixed point of the discrete operator.

    On each face ``d = (2/h) (v2 - v1) / (v2 + v1)``, which zeroes the discrete
    flux ``(v2 - v1)/h - d (v2 + v1)/2``.
    """
    v.require_positive("guide v")
    a = v.values
    h = v.h
    d1 = (2.0 / h) * (a[:, 1:] - a[:, :-1]) / (a[:, 1:] + a[:, :-1])
    d2 = (2.0 / h) * (a[1:, :] - a[:-1, :]) / (a[1:, :] + a[:-1, :])
    return DriftField(d1, d2, h)


def gate_faces(d: DriftField, x_faces: np.ndarray, y_faces: np.ndarray) -> DriftField:
    """Zero the drift on the selected x-faces and y-faces (boolean masks)."""
    x_faces = np.asarray(x_faces, dtype=bool)
    y_faces = np.asarray(y_faces, dtype=bool)
    if x_faces.shape != d.d1.shape or y_faces.shape != d.d2.shape:
        raise DimensionMismatch("face selection does not match drift shape")
    return DriftField(np.where(x_faces, 0.0, d.d1), np.where(y_faces, 0.0, d.d2), d.h)


def label_seam_faces(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the x- and y-faces whose two pixels carry different labels."""
    return labels[:, 1:] != labels[:, :-1], labels[1:, :] != labels[:-1, :]


def _dilate_along(faces: np.ndarray, band: int, axis: int) -> np.ndarray:
    if band <= 0 or not faces.any():
        return faces
    size = [1, 1]
    size[axis] = 2 * band + 1
    return ndimage.binary_dilation(faces, structure=np.ones(size, dtype=bool))


def gate_mask_boundary(d: DriftField, mask: LabelMap, band: int = 0) -> DriftField:
    """Zero the drift on faces crossing a binary mask boundary.

    With ``band > 0`` the faces up to ``band`` positions away from a crossing
    face, on the same grid line, are zeroed too.
    """
    mask.check_matches(d.shape)
    if not mask.is_binary():
        raise ValueError("shadow mask must be binary (values 0 and 1)")
    if band < 0:
        raise ValueError("band must be >= 0")
    xf, yf = label_seam_faces(mask.labels)
    return gate_faces(d, _dilate_along(xf, band, axis=1), _dilate_along(yf, band, axis=0))


def gate_label_seams(d: DriftField, tiles: LabelMap) -> DriftField:
    """Zero the drift on every face separating two different tile labels."""
    tiles.check_matches(d.shape)
    xf, yf = label_seam_faces(tiles.labels)
    return gate_faces(d, xf, yf)
