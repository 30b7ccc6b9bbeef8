"""Point and density scores for quarterly nowcasts."""

from __future__ import annotations

import logging
from typing import Literal, Sequence, Tuple

import numpy as np
from scipy import stats

from app.core.errors import DegenerateDrawsError, DimensionError

logger = logging.getLogger(__name__)

MIN_LPS_DRAWS = 100
# Log score assigned when every draw is identical.
DEGENERATE_LOG_SCORE = -100.0

LpsMethod = Literal["kde", "normal"]


def rmse(points: Sequence[float], realized: Sequence[float]) -> float:
    points = np.asarray(points, dtype=float)
    realized = np.asarray(realized, dtype=float)
    if points.size == 0:
        raise DimensionError("rmse needs at least one nowcast")
    if points.shape != realized.shape:
        raise DimensionError("nowcasts and realizations are not aligned", points=points.shape, realized=realized.shape)
    return float(np.sqrt(np.mean((points - realized) ** 2)))


def log_score(draws: np.ndarray, realized: float, method: LpsMethod = "kde") -> Tuple[float, bool]:
    """Log predictive density at *realized* and whether the degenerate penalty was used."""
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size < MIN_LPS_DRAWS:
        raise DimensionError("log score needs at least 100 draws", n=draws.size)
    if np.ptp(draws) == 0.0:
        logger.warning("All predictive draws are identical; using the degenerate log score", extra={"event": "score"})
        return DEGENERATE_LOG_SCORE, True
    if method == "normal":
        return float(stats.norm.logpdf(realized, loc=draws.mean(), scale=draws.std(ddof=1))), False
    kde = stats.gaussian_kde(draws, bw_method="silverman")
    return float(kde.logpdf(np.array([realized]))[0]), False


def log_predictive_likelihood(draws: np.ndarray, realized: float, method: LpsMethod = "kde") -> float:
    value, _ = log_score(draws, realized, method)
    return value


def crps(draws: np.ndarray, realized: float) -> float:
    """E|X - y| - E|X - X'| / 2 over the empirical draw distribution."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DegenerateDrawsError("crps needs draws")
    first = np.mean(np.abs(x - realized))
    # sum_{i,j} |x_i - x_j| = 2 sum_i (2i - n - 1) x_(i), i = 1..n
    ranks = np.arange(1, n + 1)
    pair_mean = 2.0 * np.sum((2 * ranks - n - 1) * x) / (n * n)
    return float(first - 0.5 * pair_mean)
