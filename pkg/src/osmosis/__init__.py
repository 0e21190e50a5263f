"""Osmosis drift-diffusion filtering for images.

``u_t = div(grad u - d u)`` with no-flux boundaries, discretised on a
staggered grid and stepped with explicit Euler, implicit Euler or
multiplicative operator splitting (MOS).
"""
__version__ = "0.1.0"

from .applications import PipelineParams, balance_mosaic, fuse, remove_shadow
from .drift import DriftField, canonical_drift, gate_label_seams, gate_mask_boundary
from .grid import LabelMap, MultiChannelImage, ScalarField, shift_to_positive, total_mass, unshift
from .operators import apply_A, assemble_lines, column_sum_defect
from .solvers import (
    EvolveReport,
    SchemeConfig,
    evolve,
    stable_timestep,
    step_explicit,
    step_implicit,
    step_mos,
)
from .tridiag import solve_tridiagonal

__all__ = [
    "PipelineParams", "balance_mosaic", "fuse", "remove_shadow",
    "DriftField", "canonical_drift", "gate_label_seams", "gate_mask_boundary",
    "LabelMap", "MultiChannelImage", "ScalarField", "shift_to_positive", "total_mass", "unshift",
    "apply_A", "assemble_lines", "column_sum_defect",
    "EvolveReport", "SchemeConfig", "evolve", "stable_timestep",
    "step_explicit", "step_implicit", "step_mos", "solve_tridiagonal",
]
