"""Posterior predictive nowcasts of a quarterly series from a fitted chain."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.core.errors import ChainMismatchError, DegenerateDrawsError, InsufficientHistoryError, require_finite
from app.core.run_config import RunConfig
from app.nowcast.calendar import Vintage
from app.statespace.aggregation import aggregate_at
from app.statespace.panel import MixedFrequencyPanel
from app.system.chain import Chain
from app.system.gibbs import SystemDraw, SystemHyper
from app.system.lags import build_lag_matrix, lag_row
from app.system.mcmc import latent_step

logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)


@dataclass
class PredictiveDraws:
    series: str
    target_quarter: pd.Period
    monthly: np.ndarray  # (n_draws, 3) months of the target quarter
    quarterly: np.ndarray  # (n_draws,) per-draw aggregates

    def __post_init__(self) -> None:
        if self.quarterly.shape[0] != self.monthly.shape[0]:
            raise DegenerateDrawsError("monthly and quarterly draw counts differ")
        require_finite("predictive draws", self.monthly, self.quarterly)

    @property
    def n_draws(self) -> int:
        return int(self.quarterly.shape[0])

    @property
    def mean(self) -> float:
        return float(np.mean(self.quarterly))

    def quantiles(self, probs: Sequence[float] = QUANTILES) -> np.ndarray:
        return np.quantile(self.quarterly, probs)


def _simulate_forward(
    draw: SystemDraw,
    path: np.ndarray,
    steps: int,
    hyper: SystemHyper,
    rng: np.random.Generator,
) -> np.ndarray:
    """Extend *path* (T x M) by *steps* months: conditional mean plus a Sigma shock."""
    if steps <= 0:
        return path
    shock_factor = draw.Q * np.sqrt(draw.H)  # Q diag(sqrt H), so factor factor' = Sigma
    out = np.vstack([path, np.empty((steps, path.shape[1]))])
    T = path.shape[0]
    for t in range(T, T + steps):
        x = lag_row(out[:t], hyper.p)
        mean = draw.conditional_mean(x[None, :], hyper)[0]
        out[t] = mean + shock_factor @ rng.standard_normal(hyper.M)
    return out


def refresh_latents(
    chain: Chain,
    panel: MixedFrequencyPanel,
    config: RunConfig,
    rng: np.random.Generator,
) -> Chain:
    """Redraw each stored draw's latent months on a newer vintage, keeping its parameters."""
    if chain.hyper is None:
        raise ChainMismatchError("chain has no attached hyperparameters")
    if tuple(chain.series) != tuple(panel.series):
        raise ChainMismatchError("chain and panel cover different series")
    hyper = chain.hyper
    start = panel.initial_fill()
    refreshed = Chain(
        chain_id=chain.chain_id,
        config_hash=chain.config_hash,
        mode=chain.mode,
        series=chain.series,
        dates=tuple(str(d) for d in panel.dates),
        hyper=hyper,
    )
    for draw, old in zip(chain.draws, chain.filled):
        filled = start.copy()
        overlap = min(old.shape[0], filled.shape[0])
        filled[:overlap] = old[:overlap]
        draw = replace(draw, fitted=draw.conditional_mean(build_lag_matrix(filled, hyper.p), hyper))
        new_filled, _ = latent_step(draw, filled, panel, hyper, config, rng)
        refreshed.draws.append(draw)
        refreshed.filled.append(new_filled)
    refreshed.sweeps_done = chain.sweeps_done
    return refreshed


def predict_quarter(
    chain: Chain,
    vintage: Vintage,
    rng: np.random.Generator,
    target_series: Optional[str] = None,
    target_quarter: Optional[pd.Period] = None,
) -> PredictiveDraws:
    if chain.hyper is None:
        raise ChainMismatchError("chain has no attached hyperparameters")
    panel = vintage.panel
    if tuple(chain.series) != tuple(panel.series):
        raise ChainMismatchError("chain and vintage cover different series")
    fit_dates = tuple(str(d) for d in panel.dates[: len(chain.dates)])
    if fit_dates != tuple(chain.dates):
        raise ChainMismatchError("chain was not fitted on this vintage")
    if not chain.filled:
        raise DegenerateDrawsError("chain holds no stored draws")

    if target_series is None:
        if not panel.quarterly_index:
            raise ChainMismatchError("panel has no quarterly series to nowcast")
        var = panel.quarterly_index[0]
    else:
        var = panel.series.index(target_series)
    quarter = target_quarter or vintage.target_quarter
    quarter_end = quarter.asfreq("M", how="end")
    t_q = panel.index_of(quarter_end)
    if t_q < 4:
        raise InsufficientHistoryError("target quarter needs four earlier months", quarter=str(quarter))

    hyper = chain.hyper
    monthly = np.empty((chain.n_draws, 3))
    quarterly = np.empty(chain.n_draws)
    for i, (draw, filled) in enumerate(zip(chain.draws, chain.filled)):
        path = _simulate_forward(draw, filled, t_q + 1 - filled.shape[0], hyper, rng)
        monthly[i] = path[t_q - 2 : t_q + 1, var]
        quarterly[i] = aggregate_at(path[:, var], t_q)

    logger.info(
        "Nowcast %s for %s: mean %.3f over %d draws",
        panel.series[var],
        quarter,
        float(np.mean(quarterly)),
        chain.n_draws,
        extra={"event": "nowcast", "origin": str(vintage.nowcast_month)},
    )
    return PredictiveDraws(series=panel.series[var], target_quarter=quarter, monthly=monthly, quarterly=quarterly)
