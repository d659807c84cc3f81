"""Figure rendering for the analysis reports.

Every figure lands next to its CSV/JSON counterpart as a PNG. Rendering is
headless (Agg) and carries no state between calls.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import AccuracyReport, SimilarityReport, StabilityReport

__all__ = ["similarity_heatmap", "accuracy_bars", "stability_bars"]


def similarity_heatmap(report: SimilarityReport, path: str | Path) -> None:
    """Annotated matrix of the report values; the absent diagonal stays blank."""
    n = len(report.row_keys)
    finite = report.values[np.isfinite(report.values)]
    vmin = min(0.0, float(finite.min())) if finite.size else 0.0

    fig, ax = plt.subplots(figsize=(1.1 * n + 2.2, 1.1 * n + 1.6))
    masked = np.ma.masked_invalid(report.values)
    image = ax.imshow(masked, cmap="viridis", vmin=vmin, vmax=1.0)
    ax.set_xticks(range(n), [k.upper() for k in report.col_keys])
    ax.set_yticks(range(n), [k.upper() for k in report.row_keys])
    for i in range(n):
        for j in range(n):
            value = report.values[i, j]
            if math.isnan(value):
                continue
            # Flip the label color on dark cells so it stays readable.
            frac = (value - vmin) / (1.0 - vmin) if vmin < 1.0 else 1.0
            ax.text(
                j,
                i,
                f"{value:.3f}",
                ha="center",
                va="center",
                color="white" if frac < 0.6 else "black",
                fontsize=9,
            )
    title = f"{report.dataset}: {report.aggregation}"
    if report.layer_index is not None:
        title += f", layer {report.layer_index}"
    ax.set_title(title)
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _grid_bars(
    algorithms: list[str],
    datasets: list[str],
    cells: dict[str, dict[str, float]],
    ylabel: str,
    path: str | Path,
) -> None:
    """Grouped bars: one group per algorithm, one bar per dataset."""
    x = np.arange(len(algorithms), dtype=np.float64)
    width = 0.8 / len(datasets)

    fig, ax = plt.subplots(figsize=(1.4 * len(algorithms) + 2.0, 4.2))
    for k, dataset in enumerate(datasets):
        heights = [cells[a][dataset] for a in algorithms]
        offset = (k - (len(datasets) - 1) / 2.0) * width
        bars = ax.bar(x + offset, heights, width * 0.92, label=dataset)
        ax.bar_label(bars, fmt="%.3f", fontsize=8)
    ax.set_xticks(x, [a.upper() for a in algorithms])
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def accuracy_bars(report: AccuracyReport, path: str | Path) -> None:
    _grid_bars(report.algorithms, report.datasets, report.mean, "mean test accuracy", path)


def stability_bars(report: StabilityReport, path: str | Path) -> None:
    _grid_bars(
        report.algorithms,
        report.datasets,
        report.values,
        "mean pairwise prediction similarity",
        path,
    )
