"""Render experiment tables to figure files next to the delimited output.

Figures are a convenience view of the emitted tables (median markers per
grid cell against the closed-form curves); the CSV remains the primary
artifact.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spectral import semicircle_density

__all__ = [
    "sweep_figure",
    "equivalence_figure",
    "spectrum_figure",
]


def _cell_medians(rows, value):
    """(n, gamma0) -> median of a finite row attribute."""
    cells: dict = {}
    for row in rows:
        v = getattr(row, value)
        if isinstance(v, float) and not math.isfinite(v):
            continue
        cells.setdefault((row.n, row.gamma0), []).append(v)
    return {key: float(np.median(vals)) for key, vals in cells.items()}


def sweep_figure(rows, path) -> Path:
    """Two panels: median leading eigenvalue and median squared overlap per
    gamma0, one marker series per size, with the predicted curves dashed."""
    path = Path(path)
    med_lam = _cell_medians(rows, "lambda1")
    med_olap = _cell_medians(rows, "overlap_sq")
    sizes = sorted({row.n for row in rows})
    gammas = sorted({row.gamma0 for row in rows})

    fig, (ax_lam, ax_olap) = plt.subplots(1, 2, figsize=(9, 3.6))
    for n in sizes:
        gs = [g for g in gammas if (n, g) in med_lam]
        ax_lam.plot(gs, [med_lam[(n, g)] for g in gs], "o-", ms=4, label=f"n = {n}")
        gs = [g for g in gammas if (n, g) in med_olap]
        ax_olap.plot(gs, [med_olap[(n, g)] for g in gs], "o-", ms=4, label=f"n = {n}")

    preds = {}
    for row in rows:
        if isinstance(row.lambda_pred, float) and math.isfinite(row.lambda_pred):
            preds[row.gamma0] = (row.lambda_pred, row.overlap_pred)
    if preds:
        gs = sorted(preds)
        ax_lam.plot(gs, [preds[g][0] for g in gs], "k--", lw=1, label="limit")
        ax_olap.plot(gs, [preds[g][1] for g in gs], "k--", lw=1, label="limit")

    ax_lam.set_xlabel(r"$\gamma_0$")
    ax_lam.set_ylabel(r"median $\lambda_1$")
    ax_olap.set_xlabel(r"$\gamma_0$")
    ax_olap.set_ylabel("median squared overlap")
    ax_olap.set_ylim(-0.02, 1.02)
    ax_lam.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def equivalence_figure(rows, path) -> Path:
    """Median residual operator norm against the size, log-log, one series
    per gamma0."""
    path = Path(path)
    med = _cell_medians(rows, "residual_norm")
    sizes = sorted({row.n for row in rows})
    gammas = sorted({row.gamma0 for row in rows})

    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    for g in gammas:
        ns = [n for n in sizes if (n, g) in med]
        vals = [med[(n, g)] for n in ns]
        if all(v > 0 for v in vals):
            ax.loglog(ns, vals, "o-", ms=4, label=rf"$\gamma_0$ = {g}")
        else:
            ax.plot(ns, vals, "o-", ms=4, label=rf"$\gamma_0$ = {g}")
    ax.set_xlabel("n")
    ax.set_ylabel(r"median $\|Y - Y_0 - P\|_{op}$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def spectrum_figure(result, path) -> Path:
    """Histogram densities with the semicircle law of the same scale."""
    path = Path(path)
    hist = result.histogram
    mids = 0.5 * (hist.edges[:-1] + hist.edges[1:])
    widths = np.diff(hist.edges)

    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.bar(mids, hist.densities(), width=widths, alpha=0.6, label="empirical")
    if result.sigma > 0:
        xs = np.linspace(hist.edges[0], hist.edges[-1], 400)
        ax.plot(xs, semicircle_density(xs, result.sigma), "k-", lw=1.2, label="semicircle")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
