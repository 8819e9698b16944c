"""Figure rendering for analyser outputs (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import CorrelationMatrix, MetaEvalResult, TableArtifact


def render_results_heatmap(table: TableArtifact, path: Path) -> Path:
    matrix = table.matrix
    rows = list(matrix.rows)
    cols = list(matrix.columns)
    data = np.full((len(rows), len(cols)), np.nan)
    for i, row in enumerate(rows):
        for j, col in enumerate(cols):
            cell = matrix.cell(row, col)
            if cell is not None:
                data[i, j] = cell.mean

    labels = [
        str(matrix.row_labels.get(r, {}).get("model", r))
        + (f" L{lvl}" if (lvl := matrix.row_labels.get(r, {}).get("level")) else "")
        for r in rows
    ]
    fig, ax = plt.subplots(
        figsize=(1.6 + 0.9 * len(cols), 1.2 + 0.45 * len(rows))
    )
    im = ax.imshow(data, aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(cols)), cols, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(rows)), labels, fontsize=8)
    for i in range(len(rows)):
        for j in range(len(cols)):
            if not np.isnan(data[i, j]):
                ax.text(j, i, f"{data[i, j]:.2f}", ha="center", va="center",
                        fontsize=7, color="white")
    ax.set_title("Mean score per experiment and metric")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_meta_bars(results: list[MetaEvalResult], path: Path) -> Path:
    scored = [r for r in results if r.avg_correlation is not None]
    names = [r.metric_name for r in scored][::-1]
    values = [r.avg_correlation for r in scored][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.9 + 0.4 * max(len(names), 1)))
    ax.barh(range(len(names)), values, color="steelblue")
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlim(-1.0, 1.0)
    ax.axvline(0.0, color="grey", linewidth=0.8)
    ax.set_xlabel("average rank correlation with degradation ordering")
    ax.set_title("Metric reliability under controlled perturbations")
    for i, v in enumerate(values):
        ax.text(v, i, f" {v:.3f}", va="center", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_correlation_heatmap(matrix: CorrelationMatrix, path: Path) -> Path:
    n = len(matrix.metrics)
    data = np.full((n, n), np.nan)
    for i, a in enumerate(matrix.metrics):
        for j, b in enumerate(matrix.metrics):
            rho = matrix.get(a, b)
            if rho is not None:
                data[i, j] = rho
    fig, ax = plt.subplots(figsize=(1.6 + 0.7 * n, 1.4 + 0.6 * n))
    im = ax.imshow(data, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
    ax.set_xticks(range(n), matrix.metrics, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(n), matrix.metrics, fontsize=8)
    for i in range(n):
        for j in range(n):
            if not np.isnan(data[i, j]):
                ax.text(j, i, f"{data[i, j]:.2f}", ha="center", va="center", fontsize=7)
    ax.set_title("Inter-metric correlation")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
