"""Figure rendering for evaluation reports.

Renders the TPSD comparison curves and structure-function maps to PNG
files next to the delimited output of the `evaluate` subcommand.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvaluationReport, SpectrumCurve, StructureGrid


def _tpsd_figure(measured: SpectrumCurve, synthetic: SpectrumCurve, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(measured.freqs[1:], measured.power[1:], label="measured")
    ax.loglog(synthetic.freqs[1:], synthetic.power[1:], label="synthetic")
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("power (energy/sec)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _structure_figure(measured: StructureGrid, synthetic: StructureGrid, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    vmax = max(measured.values.max(), synthetic.values.max())
    for ax, grid, name in zip(axes, (measured, synthetic), ("measured", "synthetic")):
        full = grid.full_plane()
        half_x = (grid.values.shape[1] + 1) // 2 - 1
        half_y = grid.values.shape[0] - 1
        extent = [-half_x, half_x, -half_y, half_y]
        im = ax.imshow(full, origin="lower", extent=extent, vmin=0, vmax=vmax, cmap="viridis")
        ax.set_title(name)
        ax.set_xlabel("x separation (px)")
    axes[0].set_ylabel("y separation (px)")
    fig.colorbar(im, ax=axes, shrink=0.9)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(report: EvaluationReport, out_dir) -> list[str]:
    """Write the three comparison figures; returns the created paths."""
    paths = []
    p = os.path.join(out_dir, "tpsd_slope.png")
    _tpsd_figure(report.measured_slope_tpsd, report.synthetic_slope_tpsd, "TPSD of x-slopes", p)
    paths.append(p)
    p = os.path.join(out_dir, "tpsd_phase.png")
    _tpsd_figure(report.measured_phase_tpsd, report.synthetic_phase_tpsd, "TPSD of phase", p)
    paths.append(p)
    p = os.path.join(out_dir, "structure_function.png")
    _structure_figure(report.measured_structure, report.synthetic_structure, p)
    paths.append(p)
    return paths
