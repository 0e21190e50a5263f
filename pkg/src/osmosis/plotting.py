"""Figures written next to CLI outputs. Uses the non-interactive Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_convergence", "plot_bench", "plot_drift"]

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
}


def plot_convergence(reports, path, title=None):
    """Update norm, relative mass drift and minimum value per iteration, one line per channel."""
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3))
        for c, rep in enumerate(reports):
            it = np.arange(1, rep.iterations + 1)
            mass = np.asarray(rep.mass)
            axes[0].semilogy(it, rep.update_norm, label=f"channel {c}")
            drift = np.abs(mass[1:] - mass[0]) / abs(mass[0])
            axes[1].semilogy(it, np.maximum(drift, 1e-18))
            axes[2].plot(it, rep.min_value[1:])
        axes[0].set_ylabel("relative update / tau")
        axes[1].set_ylabel("relative mass drift")
        axes[2].set_ylabel("min value")
        for ax in axes:
            ax.set_xlabel("iteration")
        if len(reports) > 1:
            axes[0].legend(frameon=False)
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)


def plot_bench(rows, path):
    """Seconds per iteration against pixel count, log-log, with a linear reference."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        for scheme in sorted({r.scheme for r in rows}):
            sel = sorted((r for r in rows if r.scheme == scheme), key=lambda r: r.pixels)
            px = np.array([r.pixels for r in sel], dtype=float)
            t = np.array([r.seconds_per_iter for r in sel])
            ax.loglog(px, t, "o-", label=scheme)
            ax.loglog(px, t[0] * px / px[0], ":", color="grey", lw=0.8)
        ax.set_xlabel("pixels")
        ax.set_ylabel("seconds per iteration")
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)


def plot_drift(d, path):
    with plt.rc_context(_STYLE | {"axes.grid": False}):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
        for ax, comp, name in zip(axes, (d.d1, d.d2), ("x-faces", "y-faces")):
            lim = max(np.abs(comp).max(), 1e-12)
            im = ax.imshow(comp, cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
            ax.set_title(f"drift on {name}")
            fig.colorbar(im, ax=ax, shrink=0.8)
        fig.savefig(path)
        plt.close(fig)
