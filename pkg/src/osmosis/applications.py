"""End-to-end pipelines: shadow removal, mosaic light balancing and guided fusion."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .drift import DriftField, canonical_drift, gate_label_seams, gate_mask_boundary
from .grid import DimensionMismatch, LabelMap, MultiChannelImage, ScalarField, shift_to_positive
from .solvers import EvolveReport, SchemeConfig, evolve

__all__ = ["PipelineParams", "remove_shadow", "balance_mosaic", "fuse", "FUSE_MODES"]

log = logging.getLogger(__name__)

RESCALE_POLICIES = ("renormalize", "clamp")
FUSE_MODES = ("auto", "per-channel", "broadcast")


@dataclass(frozen=True)
class PipelineParams:
    """Settings shared by the pipelines.

    ``rescale='renormalize'`` rescales each evolved channel so its mean equals
    the mean of the shifted input before the offset is removed; ``'clamp'``
    removes the offset and clips to ``[0, max_value]``.
    """

    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    offset: float = 1.0
    band: int = 0
    rescale: str = "renormalize"
    max_value: float | None = None

    def __post_init__(self):
        if not self.offset > 0:
            raise ValueError("offset must be positive")
        if self.band < 0:
            raise ValueError("band must be >= 0")
        if self.rescale not in RESCALE_POLICIES:
            raise ValueError(f"rescale must be one of {RESCALE_POLICIES}")


Gate = Callable[[DriftField], DriftField]
Callback = Callable[[int, int, np.ndarray, EvolveReport], None]


def _run_channel(init: ScalarField, guide: ScalarField, gate: Gate | None, p: PipelineParams,
                 cfg: SchemeConfig, on_step=None) -> tuple[ScalarField, EvolveReport]:
    work = shift_to_positive(init, p.offset)
    d = canonical_drift(shift_to_positive(guide, p.offset))
    if gate is not None:
        d = gate(d)
    u, report = evolve(work, d, cfg, on_step)
    out = u.values
    if p.rescale == "renormalize":
        out = out * (work.values.mean() / out.mean())
        out = out - p.offset
    else:
        out = np.clip(out - p.offset, 0.0, p.max_value)
    return ScalarField(out, init.h), report


def _run(image: MultiChannelImage, guides, gate, p: PipelineParams, cfg: SchemeConfig,
         with_reports: bool, callback: Callback | None):
    outs, reports = [], []
    for c, (chan, guide) in enumerate(zip(image.channels, guides)):
        on_step = None if callback is None else (lambda k, u, r, c=c: callback(c, k, u, r))
        out, rep = _run_channel(chan, guide, gate, p, cfg, on_step)
        log.info("channel %d: %d steps (converged=%s)", c, rep.iterations, rep.converged)
        outs.append(out)
        reports.append(rep)
    result = MultiChannelImage(tuple(outs), image.tag)
    return (result, reports) if with_reports else result


def remove_shadow(image: MultiChannelImage, shadow_mask: LabelMap, p: PipelineParams = PipelineParams(),
                  *, with_reports: bool = False, callback: Callback | None = None):
    """Flatten a constant multiplicative shadow marked by a binary mask.

    Each channel evolves from itself under its own canonical drift, with the
    drift zeroed on faces crossing the mask boundary.
    """
    shadow_mask.check_matches(image.shape)
    if not shadow_mask.is_binary():
        raise ValueError("shadow mask must be binary (values 0 and 1)")
    gate = lambda d: gate_mask_boundary(d, shadow_mask, p.band)  # noqa: E731
    return _run(image, image.channels, gate, p, p.scheme, with_reports, callback)


def balance_mosaic(image: MultiChannelImage, tiles: LabelMap, p: PipelineParams = PipelineParams(),
                   *, with_reports: bool = False, callback: Callback | None = None):
    """Equalize per-tile exposure differences, keeping detail inside each tile."""
    tiles.check_matches(image.shape)
    gate = lambda d: gate_label_seams(d, tiles)  # noqa: E731
    return _run(image, image.channels, gate, p, p.scheme, with_reports, callback)


def fuse(init: MultiChannelImage, guide: MultiChannelImage, p: PipelineParams = PipelineParams(),
         *, mode: str = "auto", budget: int | None = None, with_reports: bool = False,
         callback: Callback | None = None):
    """Evolve ``init`` under the canonical drift of ``guide``.

    At steadiness each output channel is the (shifted) guide rescaled to the
    mass of the corresponding init channel. ``budget`` caps the step count to
    stop at an intermediate blend.

    ``mode='per-channel'`` pairs channels one to one; ``'broadcast'`` drives
    every init channel with a single guide (the channel mean of ``guide``
    when it has several). ``'auto'`` broadcasts single-channel guides only.
    """
    if init.shape != guide.shape:
        raise DimensionMismatch(f"init is {init.shape[1]}x{init.shape[0]}, "
                                f"guide is {guide.shape[1]}x{guide.shape[0]}")
    if mode not in FUSE_MODES:
        raise ValueError(f"mode must be one of {FUSE_MODES}")
    if mode == "auto":
        mode = "broadcast" if len(guide) == 1 else "per-channel"
    if mode == "per-channel":
        if len(guide) != len(init):
            raise ValueError(f"per-channel fusion needs equal channel counts ({len(init)} vs {len(guide)})")
        guides = guide.channels
    else:
        g = guide.channels[0] if len(guide) == 1 else \
            ScalarField(np.mean([c.values for c in guide.channels], axis=0), guide.channels[0].h)
        guides = [g] * len(init)
    cfg = p.scheme
    if budget is not None:
        cfg = SchemeConfig(cfg.scheme, cfg.tau, budget, cfg.steady_tol, cfg.linear_tol, cfg.order)
    return _run(init, guides, None, p, cfg, with_reports, callback)
