"""PNG and binary PGM/PPM reading and writing.

Pixel values map to reals one to one: no gamma handling and no rescaling by
the maximum value, so an 8-bit 255 reads as 255.0.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import png

from .grid import LabelMap, MultiChannelImage

__all__ = [
    "ImageFormatError",
    "Raster",
    "read_raster",
    "write_raster",
    "read_image",
    "write_image",
    "read_mask",
    "read_tiles",
    "write_labels",
    "MAX_TILE_LABEL",
]

log = logging.getLogger(__name__)

MAX_TILE_LABEL = 65535
_PNM_MAGIC = {b"P5": 1, b"P6": 3}


class ImageFormatError(ValueError):
    """Unsupported format or corrupt header/data."""


@dataclass
class Raster:
    """Integer pixel array ``(H, W, C)`` plus its bit depth (8 or 16)."""

    pixels: np.ndarray
    depth: int

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def _format_of(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        return "png"
    if ext in (".pgm", ".ppm", ".pnm"):
        return "pnm"
    raise ImageFormatError(f"unsupported image format {ext or '(none)'!r} for {path}")


# -- PNM ---------------------------------------------------------------------

def _pnm_tokens(data: bytes, count: int):
    """Return ``count`` header integers and the offset of the raster."""
    pos, out = 2, []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("corrupt PNM header")
        out.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageFormatError("corrupt PNM header")
    return out, pos + 1


def _read_pnm(path) -> Raster:
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in _PNM_MAGIC:
        raise ImageFormatError(f"{path}: only binary PGM (P5) and PPM (P6) are supported")
    (w, h, maxval), off = _pnm_tokens(data, 3)
    if w < 1 or h < 1 or not 0 < maxval <= 65535:
        raise ImageFormatError(f"{path}: corrupt PNM header")
    c = _PNM_MAGIC[magic]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * c * dtype.itemsize
    if len(data) - off < need:
        raise ImageFormatError(f"{path}: truncated raster ({len(data) - off} of {need} bytes)")
    px = np.frombuffer(data, dtype=dtype, count=w * h * c, offset=off).reshape(h, w, c)
    return Raster(px.astype(np.int64), 16 if maxval > 255 else 8)


def _write_pnm(path, r: Raster) -> None:
    c = r.channels
    if c not in (1, 3):
        raise ImageFormatError(f"PNM holds 1 or 3 channels, got {c}")
    h, w = r.pixels.shape[:2]
    maxval = 65535 if r.depth == 16 else 255
    dtype = ">u2" if r.depth == 16 else "u1"
    header = b"%s\n%d %d\n%d\n" % (b"P5" if c == 1 else b"P6", w, h, maxval)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(r.pixels.astype(dtype).tobytes())


# -- PNG ---------------------------------------------------------------------

def _read_png(path) -> Raster:
    try:
        w, h, rows, info = png.Reader(filename=str(path)).asDirect()
        px = np.vstack([np.asarray(row, dtype=np.int64) for row in rows])
    except png.Error as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    planes = info["planes"]
    px = px.reshape(h, w, planes)
    if info.get("alpha"):
        log.warning("%s: dropping alpha channel", path)
        px = px[:, :, :-1]
    depth = 16 if info["bitdepth"] > 8 else 8
    return Raster(px, depth)


def _write_png(path, r: Raster) -> None:
    h, w, c = r.pixels.shape
    if c not in (1, 3):
        raise ImageFormatError(f"PNG output supports 1 or 3 channels, got {c}")
    writer = png.Writer(w, h, greyscale=(c == 1), bitdepth=r.depth)
    rows = r.pixels.reshape(h, w * c).astype(np.uint16 if r.depth == 16 else np.uint8)
    with open(path, "wb") as fh:
        writer.write(fh, rows)


# -- public ------------------------------------------------------------------

def read_raster(path) -> Raster:
    fmt = _format_of(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"cannot read {path}")
    return _read_png(path) if fmt == "png" else _read_pnm(path)


def write_raster(path, r: Raster) -> None:
    if r.depth not in (8, 16):
        raise ValueError("bit depth must be 8 or 16")
    fmt = _format_of(path)
    (_write_png if fmt == "png" else _write_pnm)(path, r)


def read_image(path) -> MultiChannelImage:
    r = read_raster(path)
    if r.channels not in (1, 3):
        raise ImageFormatError(f"{path}: expected gray or RGB, got {r.channels} channels")
    return MultiChannelImage.from_array(r.pixels.astype(np.float64))


def write_image(img: MultiChannelImage | np.ndarray, path, depth: int = 8) -> None:
    """Round and clip to the ``depth``-bit range, then write."""
    a = img.to_array() if isinstance(img, MultiChannelImage) else np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    top = 65535 if depth == 16 else 255
    write_raster(path, Raster(np.clip(np.rint(a), 0, top).astype(np.int64), depth))


def _single_channel(path) -> np.ndarray:
    r = read_raster(path)
    if r.channels != 1:
        raise ImageFormatError(f"{path}: label maps must be single-channel")
    return r.pixels[:, :, 0]


def read_mask(path) -> LabelMap:
    """Binary mask: any non-zero pixel becomes 1."""
    return LabelMap((_single_channel(path) != 0).astype(np.int64))


def read_tiles(path) -> LabelMap:
    """Tile map with raw integer labels."""
    return LabelMap(_single_channel(path))


def write_labels(labels: LabelMap | np.ndarray, path) -> None:
    lab = labels.labels if isinstance(labels, LabelMap) else np.asarray(labels)
    if lab.max(initial=0) > MAX_TILE_LABEL:
        raise ValueError(f"tile labels above {MAX_TILE_LABEL} do not fit a 16-bit container")
    depth = 16 if lab.max(initial=0) > 255 else 8
    write_raster(path, Raster(lab.astype(np.int64)[:, :, None], depth))
