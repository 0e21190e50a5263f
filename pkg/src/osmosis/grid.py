"""Field containers shared by every stage of the osmosis pipeline.

Arrays are stored row-major with shape ``(height, width)``; the first index is
the row ``j`` (y axis), the second the column ``i`` (x axis).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ScalarField",
    "MultiChannelImage",
    "LabelMap",
    "total_mass",
    "shift_to_positive",
    "unshift",
    "DimensionMismatch",
]

CHANNEL_TAGS = ("gray", "RGB", "falsecolor")


class DimensionMismatch(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ScalarField:
    """A single image channel on a uniform grid with spacing ``h``."""

    values: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ValueError(f"ScalarField needs a 2D array, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError(f"ScalarField needs width and height >= 2, got {v.shape[::-1]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("ScalarField values must be finite")
        if not self.h > 0:
            raise ValueError("grid spacing h must be positive")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "h", float(self.h))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0))

    def require_positive(self, what: str = "field") -> None:
        if not self.is_positive():
            raise ValueError(f"{what} must be strictly positive (min {self.values.min():g})")

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.h)


@dataclass(frozen=True)
class MultiChannelImage:
    channels: tuple[ScalarField, ...]
    tag: str = "gray"

    def __post_init__(self):
        chans = tuple(self.channels)
        if not 1 <= len(chans) <= 4:
            raise ValueError(f"an image carries 1 to 4 channels, got {len(chans)}")
        if any(c.shape != chans[0].shape for c in chans):
            raise ValueError("all channels must share the same dimensions")
        if self.tag not in CHANNEL_TAGS:
            raise ValueError(f"unknown channel tag {self.tag!r}")
        object.__setattr__(self, "channels", chans)

    @classmethod
    def from_array(cls, a: np.ndarray, tag: str | None = None, h: float = 1.0) -> "MultiChannelImage":
        """Build from ``(H, W)`` or ``(H, W, C)`` arrays."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValueError(f"expected a 2D or 3D array, got shape {a.shape}")
        if tag is None:
            tag = "RGB" if a.shape[2] == 3 else "gray"
        return cls(tuple(ScalarField(a[:, :, k], h) for k in range(a.shape[2])), tag)

    def to_array(self) -> np.ndarray:
        return np.stack([c.values for c in self.channels], axis=-1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels[0].shape

    def __len__(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class LabelMap:
    """Non-negative integer label per pixel; binary masks are labels in {0, 1}."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"LabelMap needs a 2D array, got shape {lab.shape}")
        if lab.dtype.kind == "f":
            if not np.all(np.isfinite(lab)) or np.any(lab != np.round(lab)):
                raise ValueError("labels must be integers")
        elif lab.dtype.kind not in "iub":
            raise ValueError(f"unsupported label dtype {lab.dtype}")
        lab = lab.astype(np.int64)
        if lab.size and lab.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", _frozen(lab))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def is_binary(self) -> bool:
        return bool(np.all((self.labels == 0) | (self.labels == 1)))

    def check_matches(self, shape: Sequence[int]) -> None:
        if tuple(shape) != self.shape:
            raise DimensionMismatch(f"label map is {self.shape[1]}x{self.shape[0]}, "
                                    f"image is {shape[1]}x{shape[0]}")


def total_mass(field: ScalarField | np.ndarray) -> float:
    """Sum of all pixel values."""
    values = field.values if isinstance(field, ScalarField) else np.asarray(field)
    return float(np.sum(values))


def shift_to_positive(field: ScalarField, offset: float = 1.0) -> ScalarField:
    """Add ``offset`` to every pixel. Undo with :func:`unshift`."""
    if not offset > 0:
        raise ValueError("offset must be positive")
    return field.with_values(field.values + offset)


def unshift(field: ScalarField, offset: float) -> ScalarField:
    return field.with_values(field.values - offset)
