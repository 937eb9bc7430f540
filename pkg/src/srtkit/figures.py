"""Figure rendering for the report path.

Every figure is derived from the same aggregations that feed the plotdata
CSVs, drawn with the Agg backend, and saved with pinned PNG metadata so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .clinical import Category
from .pipeline import (
    PipelineResult,
    aggregate_distortion_by_discrimination,
    aggregate_srt_loss_grid,
    percentile_series,
)

LOGGER = logging.getLogger(__name__)

__all__ = ["render_all"]

_PNG_METADATA = {"Software": "srtkit"}
_PROCEDURES = ("empirical", "sii_slope", "nh_slope")


def _save(fig: plt.Figure, path: Path) -> None:
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def _category_bar(result: PipelineResult, path: Path) -> None:
    counts = result.counts["categories"]
    names = [c.value for c in Category]
    values = [counts.get(name, 0) for name in names]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), layout="constrained")
    ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels([name.replace("_", "\n") for name in names], fontsize=9)
    ax.set_ylabel("patients")
    ax.set_title("Slope categories")
    for x, v in enumerate(values):
        ax.annotate(str(v), (x, v), ha="center", va="bottom", fontsize=8)
    _save(fig, path)


def _srt_loss_figure(
    result: PipelineResult, procedure: str, path: Path
) -> bool:
    grid = aggregate_srt_loss_grid(result.patients, result.config, procedure)
    if not grid:
        return False
    config = result.config
    pta = np.array([k[0] for k in grid]) + config.pta_bin_db / 2.0
    loss = np.array([k[1] for k in grid]) + config.srt_loss_bin_db / 2.0
    counts = np.array(list(grid.values()), dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.5), layout="constrained")
    scatter = ax.scatter(
        pta,
        loss,
        s=8.0 + 40.0 * counts / counts.max(),
        c=counts,
        cmap="viridis",
        alpha=0.85,
        linewidths=0,
    )
    span = [min(pta.min(), loss.min()), max(pta.max(), loss.max())]
    ax.plot(span, span, color="0.6", linewidth=0.8, linestyle="--")
    fig.colorbar(scatter, ax=ax, label="patients per bin")
    ax.set_xlabel("PTA (dB SPL)")
    ax.set_ylabel("SRT loss (dB)")
    ax.set_title(f"SRT loss over PTA ({procedure})")
    _save(fig, path)
    return True


def _distortion_figure(
    result: PipelineResult, procedure: str, path: Path
) -> bool:
    config = result.config
    by_bin = aggregate_distortion_by_discrimination(result.patients, config, procedure)
    series = percentile_series(by_bin, config.percentiles)
    if not series:
        return False
    x = [row[0] + config.discrimination_bin_pct / 2.0 for row in series]
    fig, ax = plt.subplots(figsize=(6.0, 4.5), layout="constrained")
    for idx, level in enumerate(config.percentiles):
        y = [row[1][idx] for row in series]
        emphasis = abs(level - 50.0) < 1e-9
        ax.plot(
            x,
            y,
            marker="o",
            markersize=3,
            linewidth=2.0 if emphasis else 1.0,
            label=f"{level:g}th",
        )
    ax.set_xlabel("discrimination loss 100 - WRS_max (%)")
    ax.set_ylabel("distortion component D (dB)")
    ax.set_title(f"D over discrimination loss ({procedure})")
    ax.legend(title="percentile", fontsize=8)
    _save(fig, path)
    return True


def render_all(result: PipelineResult, fig_dir: str | Path) -> list[Path]:
    """Render the report figures; returns the files written."""
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    category_path = fig_dir / "categories.png"
    _category_bar(result, category_path)
    written.append(category_path)

    for procedure in _PROCEDURES:
        scatter_path = fig_dir / f"srt_loss_vs_pta_{procedure}.png"
        if _srt_loss_figure(result, procedure, scatter_path):
            written.append(scatter_path)
        series_path = fig_dir / f"d_vs_discrimination_loss_{procedure}.png"
        if _distortion_figure(result, procedure, series_path):
            written.append(series_path)
    return written
