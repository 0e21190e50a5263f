"""Time stepping for ``u_t = A u``: explicit Euler, implicit Euler and MOS splitting."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .drift import DriftField
from .grid import DimensionMismatch, ScalarField, total_mass
from .krylov import gmres
from .operators import apply_axis, assemble_lines, stencil
from .tridiag import ZeroPivotError, solve_cols, solve_rows, solve_tridiagonal

__all__ = [
    "SCHEMES",
    "SchemeConfig",
    "EvolveReport",
    "StabilityError",
    "ConvergenceError",
    "ZeroPivotError",
    "stable_timestep",
    "step_explicit",
    "step_implicit",
    "step_mos",
    "solve_tridiagonal",
    "make_stepper",
    "evolve",
]

log = logging.getLogger(__name__)

SCHEMES = ("explicit", "implicit", "mos")


class StabilityError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "mos"
    tau: float = 1000.0
    max_steps: int = 5000
    steady_tol: float = 1e-8
    linear_tol: float = 1e-10
    order: tuple[str, str] = ("x", "y")

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.steady_tol > 0:
            raise ValueError("steady_tol must be positive")
        if not self.linear_tol > 0:
            raise ValueError("linear_tol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if sorted(self.order) != ["x", "y"]:
            raise ValueError("order must be a permutation of ('x', 'y')")

    @property
    def final_time(self) -> float:
        return self.max_steps * self.tau


@dataclass
class EvolveReport:
    """Per-iteration diagnostics of one :func:`evolve` run.

    ``mass[0]`` and ``min_value[0]`` describe the initial datum; entry ``k``
    describes ``u^k``. ``update_norm[k-1]`` and ``wall_time[k-1]`` belong to
    the step producing ``u^k``.
    """

    scheme: str
    tau: float
    mass: list[float] = field(default_factory=list)
    min_value: list[float] = field(default_factory=list)
    update_norm: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.update_norm)

    def max_mass_drift(self) -> float:
        m = np.asarray(self.mass)
        return float(np.abs(m - m[0]).max() / abs(m[0]))

    def rows(self):
        """Metric rows ``(iteration, mass, min, update_norm, wall_time)``."""
        for k in range(self.iterations):
            yield k + 1, self.mass[k + 1], self.min_value[k + 1], self.update_norm[k], self.wall_time[k]


def stable_timestep(d: DriftField) -> float:
    """Largest explicit Euler step keeping ``I + tau A`` entrywise non-negative."""
    return float(1.0 / np.max(-stencil(d).diagonal))


def _arr(u) -> np.ndarray:
    return u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=np.float64)


def _explicit_stepper(d: DriftField, tau: float):
    limit = stable_timestep(d)
    if tau > limit:
        raise StabilityError(f"explicit step {tau:g} exceeds the stability bound {limit:g}")

    def step(u: np.ndarray) -> np.ndarray:
        return u + tau * (apply_axis(u, d, "x") + apply_axis(u, d, "y"))
    return step


def _mos_stepper(d: DriftField, tau: float, order=("x", "y")):
    systems = {ax: assemble_lines(d, ax, tau) for ax in order}

    def step(u: np.ndarray) -> np.ndarray:
        w = u
        for ax in order:
            s = systems[ax]
            solve = solve_rows if ax == "x" else solve_cols
            w = solve(s.lower, s.diag, s.upper, w)
        return w
    return step


def _implicit_stepper(d: DriftField, tau: float, linear_tol: float, max_iter: int = 3000):
    shape = d.shape

    def matvec(x):
        u = x.reshape(shape)
        return (u - tau * (apply_axis(u, d, "x") + apply_axis(u, d, "y"))).ravel()

    mos = _mos_stepper(d, tau)
    # bound on |I - tau A|: residuals below ~eps |M| |x| are rounding noise
    norm_m = 1.0 + 2.0 * tau * float(np.max(-stencil(d).diagonal))

    def step(u: np.ndarray) -> np.ndarray:
        b = u.ravel()
        bnorm = np.linalg.norm(b)
        # x0 = u keeps every Krylov correction in the zero-sum subspace, so mass is exact
        x, res, used = gmres(matvec, b, b, linear_tol * bnorm, lambda v: mos(v.reshape(shape)).ravel(),
                             max_iter=max_iter)
        if res > linear_tol * bnorm and res > 32 * np.finfo(float).eps * norm_m * np.linalg.norm(x):
            raise ConvergenceError(f"implicit solve stopped at relative residual {res / bnorm:.3e} "
                                   f"after {used} iterations (target {linear_tol:.1e})")
        return x.reshape(shape)
    return step


def make_stepper(d: DriftField, cfg: SchemeConfig) -> Callable[[np.ndarray], np.ndarray]:
    """One-step map ``u^k -> u^{k+1}`` for the configured scheme; coefficients are built once."""
    if cfg.scheme == "explicit":
        return _explicit_stepper(d, cfg.tau)
    if cfg.scheme == "implicit":
        return _implicit_stepper(d, cfg.tau, cfg.linear_tol)
    return _mos_stepper(d, cfg.tau, cfg.order)


def step_explicit(u: ScalarField, d: DriftField, tau: float) -> ScalarField:
    """``u + tau * A u``; rejects steps above :func:`stable_timestep`."""
    return ScalarField(_explicit_stepper(d, tau)(_arr(u)), d.h)


def step_implicit(u: ScalarField, d: DriftField, tau: float, linear_tol: float = 1e-10,
                  max_iter: int = 3000) -> ScalarField:
    """Solve ``(I - tau A) w = u`` with MOS-preconditioned GMRES.

    Converged means relative residual <= ``linear_tol``. When ``tau`` is so
    large that this cannot be resolved in double precision, a solve that
    stagnates below the rounding floor ``32 eps |I - tau A| |w|`` is accepted;
    anything else raises :class:`ConvergenceError`.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    return ScalarField(_implicit_stepper(d, tau, linear_tol, max_iter)(_arr(u)), d.h)


def step_mos(u: ScalarField, d: DriftField, tau: float, order=("x", "y")) -> ScalarField:
    """``(I - tau A2)^-1 (I - tau A1)^-1 u``, each factor solved line by line."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return ScalarField(_mos_stepper(d, tau, order)(_arr(u)), d.h)


def evolve(f: ScalarField, d: DriftField, cfg: SchemeConfig = SchemeConfig(),
           callback: Callable[[int, np.ndarray, EvolveReport], None] | None = None):
    """Iterate from ``f`` until the relative update ``|du|_1 / (tau |u|_1)`` drops
    to ``cfg.steady_tol`` or ``cfg.max_steps`` steps are taken.

    Returns ``(u, report)``. ``callback(k, u, report)`` runs after each step.
    """
    f.require_positive("initial datum f")
    if f.shape != d.shape:
        raise DimensionMismatch(f"initial datum {f.shape} and drift {d.shape} differ")
    step = make_stepper(d, cfg)
    u = np.array(f.values)
    report = EvolveReport(cfg.scheme, cfg.tau)
    report.mass.append(total_mass(u))
    report.min_value.append(float(u.min()))
    for k in range(1, cfg.max_steps + 1):
        t0 = time.perf_counter()
        new = step(u)
        dt = time.perf_counter() - t0
        norm = float(np.abs(new - u).sum() / (cfg.tau * np.abs(u).sum()))
        u = new
        report.mass.append(total_mass(u))
        report.min_value.append(float(u.min()))
        report.update_norm.append(norm)
        report.wall_time.append(dt)
        if callback is not None:
            callback(k, u, report)
        if not np.isfinite(norm):
            raise ConvergenceError(f"non-finite state after {k} steps")
        if norm <= cfg.steady_tol:
            report.converged = True
            break
    log.debug("%s tau=%g: %d steps, converged=%s", cfg.scheme, cfg.tau, report.iterations, report.converged)
    return ScalarField(u, f.h), report
