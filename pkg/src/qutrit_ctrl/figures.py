"""Render sweep results to PNG files next to their CSVs.

One figure per result: line panels for single-axis results (grouped by
unit so populations and phases get separate axes), heat maps for
two-axis grids, and a row of heat maps for three-axis landscapes. Known
spectroscopy results get their predicted ridge overlaid as a dashed line.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .jobio import SweepResult  # noqa: E402

__all__ = ["render_result"]

_DPI = 130


def _label(name: str, units: dict) -> str:
    unit = units.get(name, "1")
    return name if unit == "1" else f"{name} [{unit}]"


def _heat(ax, x, y, grid, title: str):
    mesh = ax.pcolormesh(x, y, grid, shading="auto", rasterized=True)
    ax.set_title(title, fontsize=9)
    return mesh


def _overlay_ridge(ax, result: SweepResult) -> None:
    meta = result.metadata
    if result.kind == "spectroscopy-2d" and "predicted_ridge" in meta:
        d02 = np.asarray(result.axes["delta02"])
        ax.plot(np.asarray(meta["predicted_ridge"]), d02, "w--", lw=1.0)
    elif result.kind.startswith("spectroscopy-amp-probe") and "predicted_ridge" in meta:
        amp = np.asarray(result.axes["amp02"])
        ax.plot(np.asarray(meta["predicted_ridge"]), amp, "w--", lw=1.0)
    elif result.kind == "spectroscopy-amp-twophoton" and "predicted_resonance" in meta:
        amp = np.asarray(result.axes["amp02"])
        ax.plot(amp, np.asarray(meta["predicted_resonance"]), "w--", lw=1.0)


def _render_lines(result: SweepResult, units: dict):
    (axis_name, axis), = result.axes.items()
    groups: dict = {}
    for name in result.values:
        groups.setdefault(units.get(name, "1"), []).append(name)
    fig, axes = plt.subplots(
        len(groups), 1, figsize=(7.0, 2.6 * len(groups)), sharex=True, squeeze=False
    )
    for ax, (unit, names) in zip(axes[:, 0], groups.items()):
        for name in names:
            ax.plot(axis, np.asarray(result.values[name]), label=name, lw=1.2)
        ax.set_ylabel(unit if unit != "1" else "")
        ax.legend(fontsize=8, ncol=2)
        ax.grid(alpha=0.25)
    axes[-1, 0].set_xlabel(_label(axis_name, units))
    return fig


def _render_maps(result: SweepResult, units: dict):
    (yname, y), (xname, x) = result.axes.items()
    names = list(result.values)
    fig, axes = plt.subplots(
        1, len(names), figsize=(4.2 * len(names), 3.6), squeeze=False
    )
    for ax, name in zip(axes[0], names):
        mesh = _heat(ax, x, y, np.asarray(result.values[name]), name)
        fig.colorbar(mesh, ax=ax, shrink=0.85)
        ax.set_xlabel(_label(xname, units))
        ax.set_ylabel(_label(yname, units))
        _overlay_ridge(ax, result)
    return fig


def _render_panels(result: SweepResult, units: dict):
    names = list(result.axes)
    panel_axis = np.asarray(result.axes[names[0]])
    y = np.asarray(result.axes[names[1]])
    x = np.asarray(result.axes[names[2]])
    (value_name, grid), = result.values.items()
    grid = np.asarray(grid)
    n = panel_axis.size
    fig, axes = plt.subplots(1, n, figsize=(3.8 * n, 3.4), squeeze=False)
    for i, ax in enumerate(axes[0]):
        mesh = _heat(
            ax, x, y, grid[i], f"{value_name} @ {names[0]}={panel_axis[i]:.3g}"
        )
        fig.colorbar(mesh, ax=ax, shrink=0.85)
        ax.set_xlabel(_label(names[2], units))
        if i == 0:
            ax.set_ylabel(_label(names[1], units))
    return fig


def render_result(result: SweepResult, path) -> Path:
    """Write the result's figure to ``path`` (PNG) and return the path."""
    units = result.metadata.get("units", {})
    n_axes = len(result.axes)
    if n_axes == 1:
        fig = _render_lines(result, units)
    elif n_axes == 2:
        fig = _render_maps(result, units)
    elif n_axes == 3 and len(result.values) == 1:
        fig = _render_panels(result, units)
    else:
        raise ValueError(f"no renderer for {n_axes} axes / {len(result.values)} grids")
    fig.suptitle(result.kind, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
