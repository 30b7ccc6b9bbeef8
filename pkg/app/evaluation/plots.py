"""SVG figures. Output bytes depend only on the inputs (fixed hash salt, no date stamp)."""

from __future__ import annotations

import logging
import os
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

from app.evaluation.report import EvalReport, OriginScore  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "bavart-nowcast"
_SVG_META = {"Date": None}


def _save(fig, path: str) -> str:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_cumulative_lps(origins: Sequence[str], cumulative: np.ndarray, path: str, label: str = "A - B") -> str:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(range(len(origins)), cumulative, color="black", lw=1.2)
    ax.axhline(0.0, color="grey", lw=0.8, ls="--")
    step = max(1, len(origins) // 8)
    ax.set_xticks(range(0, len(origins), step))
    ax.set_xticklabels(list(origins)[::step], rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(f"cumulative LPS ({label})")
    fig.tight_layout()
    return _save(fig, path)


def plot_predictive_densities(
    draws: Dict[str, np.ndarray],
    realized: Dict[str, float],
    path: str,
    max_panels: int = 12,
) -> Optional[str]:
    origins = sorted(draws)[-max_panels:]
    if not origins:
        return None
    cols = min(4, len(origins))
    rows = int(np.ceil(len(origins) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.4 * rows), squeeze=False)
    for ax, origin in zip(axes.ravel(), origins):
        sample = np.asarray(draws[origin], dtype=float)
        if np.ptp(sample) > 0.0:
            grid = np.linspace(sample.min(), sample.max(), 200)
            ax.plot(grid, stats.gaussian_kde(sample, bw_method="silverman")(grid), color="black", lw=1.0)
        value = realized.get(origin)
        if value is not None and np.isfinite(value):
            ax.axvline(value, color="red", lw=1.0)
        ax.set_title(origin, fontsize=8)
        ax.tick_params(labelsize=7)
    for ax in axes.ravel()[len(origins) :]:
        ax.axis("off")
    fig.tight_layout()
    return _save(fig, path)


def plot_pit_histogram(pits: Sequence[float], path: str, bins: int = 10) -> str:
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.hist(np.asarray(pits, dtype=float), bins=bins, range=(0.0, 1.0), color="grey", edgecolor="black")
    ax.axhline(len(pits) / bins, color="red", lw=0.8, ls="--")
    ax.set_xlabel("PIT")
    fig.tight_layout()
    return _save(fig, path)


def plot_nowcast_bands(scores: Sequence[OriginScore], path: str) -> Optional[str]:
    """Nowcast mean with 50% and 90% bands against the realized values, by origin."""
    scores = [s for s in scores if None not in (s.q05, s.q25, s.q75, s.q95)]
    if not scores:
        return None
    pos = np.arange(len(scores))
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.fill_between(pos, [s.q05 for s in scores], [s.q95 for s in scores], color="0.85", label="90%")
    ax.fill_between(pos, [s.q25 for s in scores], [s.q75 for s in scores], color="0.65", label="50%")
    ax.plot(pos, [s.mean for s in scores], color="black", lw=1.0, label="mean")
    ax.plot(pos, [s.realized for s in scores], "o", color="red", ms=3, label="realized")
    step = max(1, len(scores) // 8)
    ax.set_xticks(pos[::step])
    ax.set_xticklabels([s.origin for s in scores][::step], rotation=45, ha="right", fontsize=8)
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return _save(fig, path)


def plot_scores(report: EvalReport, directory: str) -> None:
    """Per-report figures written into *directory*."""
    os.makedirs(directory, exist_ok=True)
    origins = [o.origin for o in report.origins]
    running = np.cumsum([o.log_score for o in report.origins])
    plot_cumulative_lps(origins, running, os.path.join(directory, "cumulative_lps.svg"), label="model")
    plot_pit_histogram([o.pit for o in report.origins], os.path.join(directory, "pit_histogram.svg"))
    plot_nowcast_bands(report.origins, os.path.join(directory, "nowcast_bands.svg"))
