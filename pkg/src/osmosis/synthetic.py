"""Synthetic fixtures: smooth ground truths, shadows and exposure-mismatched mosaics."""
from __future__ import annotations

import numpy as np

__all__ = ["smooth_image", "random_positive", "disk_mask", "quadrant_tiles", "shadowed", "mosaic"]


def smooth_image(shape, seed=0, low=40.0, high=220.0, modes=6) -> np.ndarray:
    """Sum of a few random low-frequency cosines, rescaled to ``[low, high]``."""
    rng = np.random.default_rng(seed)
    H, W = shape
    y, x = np.mgrid[0:H, 0:W]
    y = y / H
    x = x / W
    img = 0.5 * x + 0.3 * y
    for _ in range(modes):
        kx, ky = rng.uniform(0.5, 4.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        img = img + rng.uniform(0.2, 1.0) * np.cos(2 * np.pi * (kx * x + ky * y) + phase)
    img = (img - img.min()) / (img.max() - img.min())
    return low + (high - low) * img


def random_positive(shape, seed=0, low=1.0, high=2.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, size=shape)


def disk_mask(shape, center=None, radius=None) -> np.ndarray:
    H, W = shape
    cy, cx = center if center is not None else (H / 2, W / 2)
    r = radius if radius is not None else min(H, W) / 4
    y, x = np.mgrid[0:H, 0:W]
    return ((y + 0.5 - cy) ** 2 + (x + 0.5 - cx) ** 2 <= r * r).astype(np.int64)


def quadrant_tiles(shape) -> np.ndarray:
    """2x2 tile labels 0..3 in row-major quadrant order."""
    H, W = shape
    y, x = np.mgrid[0:H, 0:W]
    return (2 * (y >= H // 2) + (x >= W // 2)).astype(np.int64)


def shadowed(truth: np.ndarray, mask: np.ndarray, factor: float = 0.4) -> np.ndarray:
    return truth * np.where(mask == 1, factor, 1.0)


def mosaic(truth: np.ndarray, tiles: np.ndarray, gains=(0.8, 1.0, 1.2, 1.5)) -> np.ndarray:
    return truth * np.asarray(gains, dtype=np.float64)[tiles]
