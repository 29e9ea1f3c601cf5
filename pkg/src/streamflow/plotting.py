"""Figures written next to the CSV outputs (Agg backend, files only)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .batch import HISTORICAL_SPEEDUPS  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(scale=1.0, ratio=None):
    width = 5.5 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return (width, width * ratio)


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_curve(path, points, title=None):
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=figsize(0.8, 1.0))
        if points.shape[1] == 3:
            ax = fig.add_subplot(projection="3d")
            ax.plot(points[:, 0], points[:, 1], points[:, 2])
            ax.set_zlabel("z")
        else:
            ax = fig.add_subplot()
            ax.plot(points[:, 0], points[:, 1])
            ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_splines(path, named_splines, resolution=200):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8, 1.0))
        s = np.linspace(0.0, 1.0, resolution)
        for lid, sp in named_splines:
            pts = sp.eval(s)
            knots = sp.eval(sp.knots())
            (line,) = ax.plot(pts[:, 0], pts[:, 1], label=str(lid))
            ax.plot(knots[:, 0], knots[:, 1], ".", ms=3, color=line.get_color())
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal", adjustable="datalim")
        if len(named_splines) <= 8:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_solutions(path, named_solutions):
    with plt.rc_context(STYLE):
        fig, (ax_u, ax_v) = plt.subplots(2, 1, sharex=True, figsize=figsize(1.0, 0.8))
        for lid, sol in named_solutions:
            ax_u.plot(sol.s, sol.u, label=str(lid))
            ax_v.plot(sol.s, sol.udot)
        ax_u.set_ylabel("u")
        ax_v.set_ylabel("du/ds")
        ax_v.set_xlabel("s")
        if len(named_solutions) <= 8:
            ax_u.legend(frameon=False)
        return _save(fig, path)


def plot_speedups(path, reports, show_reference=True):
    """Speedup against M per strategy; reference values dashed when labels match."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        kind = reports[0].kind if reports else "interpolate"
        ms = [r.m for r in reports]
        labels = [row.label for row in reports[0].rows] if reports else []
        for lbl in labels:
            ys = [r.row(lbl).speedup for r in reports]
            (line,) = ax.plot(ms, ys, "o-", ms=3, label=lbl)
            ref = HISTORICAL_SPEEDUPS.get("solve" if kind == "both" else kind, {}).get(lbl)
            if show_reference and ref:
                pairs = [(m, v) for m, v in sorted(ref.items()) if v is not None]
                ax.plot(*zip(*pairs), "--", color=line.get_color(), alpha=0.5, label=f"{lbl}, reference")
        ax.axhline(1.0, color="0.6", lw=0.8)
        ax.set_xlabel("streamlines M")
        ax.set_ylabel("speedup T_serial / T")
        ax.set_title(f"{kind} speedup")
        ax.legend(frameon=False)
        return _save(fig, path)
