"""
Synthetic mixed-frequency panels
================================
A monthly VAR(1) is simulated for every series, including the quarterly
one; the quarterly series is then replaced by its intertemporal aggregate
on quarter-end months.  The full monthly truth is kept for oracle checks.

DGPs:
  linear     y_t = A y_{t-1} + e_t
  threshold  y_t = A y_{t-1} + d * sign(y_{1,t-1}) + e_t
  outlier    linear, plus one large shock to every series late in the sample
  threshold_outlier  threshold, plus the same late shock
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from app.core.errors import DimensionError, UnstableDGPError
from app.core.run_config import SimulationSettings
from app.statespace.aggregation import aggregate_at
from app.statespace.panel import MONTHLY, QUARTERLY, MixedFrequencyPanel, is_quarter_end

logger = logging.getLogger(__name__)

MONTHLY_NAMES = ("IP", "ESI", "CAR", "PMI", "EUR")
QUARTERLY_NAME = "GDP"
BURN_IN = 50
THRESHOLD_JUMP = 1.0
THRESHOLD_DGPS = ("threshold", "threshold_outlier")
OUTLIER_DGPS = ("outlier", "threshold_outlier")


@dataclass
class SimulatedPanel:
    panel: MixedFrequencyPanel
    truth: np.ndarray  # (T, M) full monthly values, latents included
    coefficients: np.ndarray  # (M, M), y_t = A y_{t-1} + ...
    shock_cov: np.ndarray
    dgp: str


def series_names(n_monthly: int) -> tuple:
    monthly = [MONTHLY_NAMES[i] if i < len(MONTHLY_NAMES) else f"M{i + 1}" for i in range(n_monthly)]
    return (QUARTERLY_NAME, *monthly)


def spectral_radius(coefficients: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(coefficients))))


def default_coefficients(M: int, rng: np.random.Generator) -> np.ndarray:
    a = 0.1 * rng.uniform(-1.0, 1.0, size=(M, M))
    np.fill_diagonal(a, rng.uniform(0.2, 0.5, size=M))
    return a


def default_shock_cov(M: int, scale: float, correlation: float = 0.3) -> np.ndarray:
    cov = np.full((M, M), correlation)
    np.fill_diagonal(cov, 1.0)
    return scale**2 * cov


def simulate_panel(
    settings: SimulationSettings,
    rng: np.random.Generator,
    coefficients: Optional[np.ndarray] = None,
) -> SimulatedPanel:
    names = series_names(settings.n_monthly)
    M = len(names)
    a = default_coefficients(M, rng) if coefficients is None else np.asarray(coefficients, dtype=float)
    if a.shape != (M, M):
        raise DimensionError("coefficient matrix must be M x M", shape=a.shape, M=M)
    radius = spectral_radius(a)
    if radius >= 1.0:
        raise UnstableDGPError("DGP has an explosive root", spectral_radius=round(radius, 4))

    cov = default_shock_cov(M, settings.noise_scale, settings.shock_correlation)
    chol = np.linalg.cholesky(cov) if settings.noise_scale > 0 else np.zeros((M, M))
    total = BURN_IN + settings.n_months
    y = np.zeros((total, M))
    outlier_at = total - settings.outlier_months_from_end
    for t in range(1, total):
        mean = a @ y[t - 1]
        if settings.dgp in THRESHOLD_DGPS:
            mean = mean + THRESHOLD_JUMP * np.sign(y[t - 1, 0])
        shock = chol @ rng.standard_normal(M)
        if settings.dgp in OUTLIER_DGPS and t == outlier_at:
            shock = shock + settings.outlier_size
        y[t] = mean + shock
    truth = y[BURN_IN:]

    dates = pd.period_range(pd.Period(settings.start, freq="M"), periods=settings.n_months, freq="M")
    values = truth.copy()
    quarter_end = np.array([is_quarter_end(d) for d in dates])
    values[:, 0] = np.nan
    for t in np.flatnonzero(quarter_end):
        if t >= 4:
            values[t, 0] = aggregate_at(truth[:, 0], t)

    panel = MixedFrequencyPanel(
        dates=dates,
        series=names,
        frequencies=(QUARTERLY,) + (MONTHLY,) * settings.n_monthly,
        values=values,
    )
    logger.info(
        "Simulated %s panel: %d months, spectral radius %.3f",
        settings.dgp,
        settings.n_months,
        radius,
        extra={"event": "simulate"},
    )
    return SimulatedPanel(panel=panel, truth=truth, coefficients=a, shock_cov=cov, dgp=settings.dgp)
