"""
Probability integral transforms
===============================
Raw PITs are transformed with the inverse normal c.d.f.; a calibrated
forecaster gives r_t with mean 0, variance 1 and no autocorrelation.
Intervals for the three statistics come from a stationary bootstrap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import stats

from app.core.errors import DimensionError

logger = logging.getLogger(__name__)

MIN_PIT_ORIGINS = 8


def pit_value(draws: np.ndarray, realized: float, rng: Optional[np.random.Generator] = None) -> float:
    """Share of draws below *realized*; ties are split uniformly at random."""
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size == 0:
        raise DimensionError("pit needs draws")
    below = np.count_nonzero(draws < realized)
    ties = np.count_nonzero(draws == realized)
    u = 0.5 if rng is None else float(rng.random())
    return float((below + u * ties) / draws.size)


@dataclass
class PitSeries:
    raw: np.ndarray
    r: np.ndarray
    clipped: np.ndarray  # bool per origin

    @classmethod
    def from_pits(cls, pits: np.ndarray, n_draws: int) -> "PitSeries":
        raw = np.asarray(pits, dtype=float)
        if np.any((raw < 0.0) | (raw > 1.0)):
            raise DimensionError("PIT values must lie in [0, 1]")
        lo, hi = 1.0 / (n_draws + 1), n_draws / (n_draws + 1)
        clipped = (raw < lo) | (raw > hi)
        if np.any(clipped):
            logger.warning("%d PIT values clipped", int(clipped.sum()), extra={"event": "pit"})
        return cls(raw=raw, r=stats.norm.ppf(np.clip(raw, lo, hi)), clipped=clipped)


def _ar1_slope(r: np.ndarray) -> np.ndarray:
    """OLS slope of r_t on (1, r_{t-1}) along the last axis."""
    lead, lag = r[..., 1:], r[..., :-1]
    lag_c = lag - lag.mean(axis=-1, keepdims=True)
    lead_c = lead - lead.mean(axis=-1, keepdims=True)
    denom = np.sum(lag_c * lag_c, axis=-1)
    num = np.sum(lag_c * lead_c, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
    return slope


def stationary_bootstrap_indices(n: int, reps: int, block_length: float, rng: np.random.Generator) -> np.ndarray:
    """(reps, n) resampling indices with geometric block lengths, wrapping around."""
    p_new = 1.0 / block_length
    idx = np.empty((reps, n), dtype=np.int64)
    idx[:, 0] = rng.integers(n, size=reps)
    starts = rng.integers(n, size=(reps, n))
    new_block = rng.random((reps, n)) < p_new
    for t in range(1, n):
        idx[:, t] = np.where(new_block[:, t], starts[:, t], (idx[:, t - 1] + 1) % n)
    return idx


@dataclass
class TransformedPitStats:
    n: int
    mean: float
    variance: float
    ar1: float
    intervals: Dict[str, Tuple[float, float]]
    n_clipped: int = 0


def pit_diagnostics(
    series: PitSeries,
    reps: int = 10000,
    block_length: float = 4.0,
    seed: int = 7,
) -> TransformedPitStats:
    r = series.r
    n = r.shape[0]
    if n < MIN_PIT_ORIGINS:
        raise DimensionError("PIT diagnostics need at least 8 origins", n=n)
    mean = float(np.mean(r))
    variance = float(np.var(r, ddof=1))
    ar1 = float(_ar1_slope(r))

    rng = np.random.default_rng(seed)
    sample = r[stationary_bootstrap_indices(n, reps, block_length, rng)]
    boot = {
        "mean": sample.mean(axis=1),
        "variance": sample.var(axis=1, ddof=1),
        "ar1": _ar1_slope(sample),
    }
    estimates = {"mean": mean, "variance": variance, "ar1": ar1}
    intervals = {}
    for name, values in boot.items():
        lo, hi = np.quantile(values, [0.025, 0.975])
        est = estimates[name]
        intervals[name] = (float(min(lo, est)), float(max(hi, est)))
    return TransformedPitStats(
        n=n,
        mean=mean,
        variance=variance,
        ar1=ar1,
        intervals=intervals,
        n_clipped=int(series.clipped.sum()),
    )
