"""SVG figures for trajectories and stability regions.

Figures are built on a bare :class:`matplotlib.figure.Figure` (no pyplot
state) and saved with a fixed hash salt and no date stamp, so the same data
always produces byte-identical SVG.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
import numpy as np

HASH_SALT = "mprk-lab"

STYLE = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "svg.fonttype": "path",
    "svg.hashsalt": HASH_SALT,
}


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(STYLE):
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _new_figure(ncols: int = 1, nrows: int = 1, size=(6.0, 3.6)):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(size[0] * ncols, size[1] * nrows))
        axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes.ravel()


def _draw_trajectory(ax, traj, exact=None, title=""):
    for i in range(traj.states.shape[1]):
        line, = ax.plot(traj.times, traj.states[:, i], marker="o" if len(traj) < 60 else None,
                        markersize=3, label=f"y{i + 1}")
        if exact is not None:
            ax.plot(exact.times, exact.states[:, i], linestyle="--", color=line.get_color(),
                    linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=7)


def plot_trajectory(traj, path, exact=None, title: str = "", show_invariants: bool = True) -> Path:
    """Component curves, optionally overlaid on a dashed reference, plus invariant traces."""
    with matplotlib.rc_context(STYLE):
        fig, axes = _new_figure(ncols=2 if show_invariants else 1)
        _draw_trajectory(axes[0], traj, exact, title)
        if show_invariants:
            ax = axes[1]
            for i in range(traj.invariants_trace.shape[1]):
                ax.plot(traj.times, traj.invariants_trace[:, i], label=f"inv{i + 1}")
            ax.set_xlabel("t")
            ax.set_title("linear invariants")
            ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_trajectory_panels(panels, path) -> Path:
    """Several ``(trajectory, exact, title)`` panels side by side."""
    with matplotlib.rc_context(STYLE):
        fig, axes = _new_figure(ncols=len(panels), size=(4.2, 3.6))
        for ax, (traj, exact, title) in zip(axes, panels):
            _draw_trajectory(ax, traj, exact, title)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_region(scan, path, levels=(1.0,)) -> Path:
    """Heat map of ``|R(z)|`` clipped at 2 with the unit contour drawn on top."""
    with matplotlib.rc_context(STYLE):
        fig, (ax,) = _new_figure(size=(5.0, 4.2))
        extent = (scan.re[0], scan.re[-1], scan.im[0], scan.im[-1])
        img = ax.imshow(np.clip(scan.modulus, 0.0, 2.0), origin="lower", extent=extent,
                        aspect="auto", cmap="viridis", vmin=0.0, vmax=2.0)
        if scan.re.size > 1 and scan.im.size > 1:
            ax.contour(scan.re, scan.im, scan.modulus, levels=list(levels), colors="white",
                       linewidths=1.0)
        fig.colorbar(img, ax=ax, label="|R(z)|")
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        ax.set_title(f"alpha = {scan.alpha:g}")
        fig.tight_layout()
    return save_svg(fig, path)
