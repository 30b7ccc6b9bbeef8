"""
Pseudo-real-time backtest
=========================
For every origin (nowcast month) the panel is masked by the release
calendar, the model is re-estimated on the expanding window and the target
quarter is nowcast.  Origins run through a joblib work queue; each origin
draws from its own seed spawned off the master seed, so results do not
depend on scheduling.  A failed origin is recorded and the loop continues.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import ConfigError, InsufficientHistoryError, SchemaError, classify_error
from app.core.provenance import provenance_block
from app.core.run_config import RunConfig
from app.nowcast.calendar import ReleaseCalendar, make_vintage, month_in_quarter
from app.nowcast.predict import QUANTILES, PredictiveDraws, predict_quarter, refresh_latents
from app.statespace.panel import MixedFrequencyPanel
from app.system.mcmc import run_mcmc

logger = logging.getLogger(__name__)

RESULTS_FILE = "backtest.csv"
DRAWS_FILE = "backtest_draws.npz"
QUANTILE_COLUMNS = [f"q{int(round(q * 100)):02d}" for q in QUANTILES]


class BacktestRecord(BaseModel):
    origin: str
    panel_id: str
    series: str
    quarter: str
    month_in_quarter: int
    status: str = "ok"
    error: str = ""
    n_draws: int = 0
    mean: float = float("nan")
    q05: float = float("nan")
    q10: float = float("nan")
    q25: float = float("nan")
    q50: float = float("nan")
    q75: float = float("nan")
    q90: float = float("nan")
    q95: float = float("nan")
    realized: float = float("nan")


@dataclass
class BacktestResult:
    records: List[BacktestRecord]
    draws: Dict[str, np.ndarray] = field(default_factory=dict)  # origin -> quarterly draws
    provenance: Dict[str, object] = field(default_factory=dict)

    @property
    def failures(self) -> List[BacktestRecord]:
        return [r for r in self.records if r.status != "ok"]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.records])


def resolve_origins(config: RunConfig, panel: MixedFrequencyPanel) -> List[pd.Period]:
    bt = config.backtest
    if bt.origins:
        origins = [pd.Period(o, freq="M") for o in bt.origins]
    elif bt.first_origin and bt.n_origins:
        first = pd.Period(bt.first_origin, freq="M")
        origins = list(pd.period_range(first, periods=bt.n_origins, freq="M"))
    else:
        raise ConfigError("backtest needs origins or first_origin + n_origins")
    if origins != sorted(origins):
        raise ConfigError("backtest origins must be sorted")
    if origins[0] < panel.dates[0]:
        raise InsufficientHistoryError("first origin precedes the panel", origin=str(origins[0]))
    return origins


def _quarterly_factor(config: RunConfig) -> float:
    return 3.0 if config.quarterly_divide_by_3 else 1.0


def realized_value(panel: MixedFrequencyPanel, series: str, quarter: pd.Period) -> float:
    var = panel.series.index(series)
    end = quarter.asfreq("M", how="end")
    if end > panel.dates[-1]:
        return float("nan")
    return float(panel.values[panel.index_of(end), var])


def _record(
    origin: pd.Period,
    config: RunConfig,
    panel: MixedFrequencyPanel,
    series: str,
    draws: Optional[PredictiveDraws],
    error: str = "",
) -> BacktestRecord:
    quarter = origin.asfreq("Q")
    factor = _quarterly_factor(config)
    record = BacktestRecord(
        origin=str(origin),
        panel_id=config.backtest.panel_id,
        series=series,
        quarter=str(quarter),
        month_in_quarter=month_in_quarter(origin),
        realized=factor * realized_value(panel, series, quarter),
    )
    if draws is None:
        record.status, record.error = "failed", error
        return record
    quantiles = factor * draws.quantiles()
    record.n_draws = draws.n_draws
    record.mean = factor * draws.mean
    for name, value in zip(QUANTILE_COLUMNS, quantiles):
        setattr(record, name, float(value))
    return record


def _run_group(
    panel: MixedFrequencyPanel,
    config: RunConfig,
    origins: Sequence[pd.Period],
    seeds: Sequence[np.random.SeedSequence],
    series: str,
) -> List[tuple]:
    """Origins sharing one fit (a single origin unless refit is quarterly)."""
    calendar = ReleaseCalendar.from_settings(config.calendar)
    out = []
    chain = None
    for origin, seed in zip(origins, seeds):
        fit_seed, predict_seed = seed.spawn(2)
        rng = np.random.default_rng(predict_seed)
        try:
            vintage = make_vintage(panel, calendar, origin)
            fit_panel = vintage.fit_panel()
            if fit_panel.T < config.backtest.min_train_months:
                raise InsufficientHistoryError(
                    "not enough months before the origin", T=fit_panel.T, required=config.backtest.min_train_months
                )
            if chain is None:
                chain = run_mcmc(fit_panel, config, seed=fit_seed)
            else:
                chain = refresh_latents(chain, fit_panel, config, rng)
            draws = predict_quarter(chain, vintage, rng, target_series=series)
            out.append((_record(origin, config, panel, series, draws), factor_draws(draws, config)))
        except Exception as exc:  # recorded, the backtest continues
            classified = classify_error(exc)
            logger.error(
                "Origin failed: %s",
                classified,
                extra={"event": "backtest", "origin": str(origin)},
            )
            out.append((_record(origin, config, panel, series, None, error=classified.message), None))
    return out


def factor_draws(draws: PredictiveDraws, config: RunConfig) -> np.ndarray:
    return _quarterly_factor(config) * draws.quarterly


def _groups(origins: List[pd.Period], refit: str) -> List[List[int]]:
    if refit == "origin":
        return [[i] for i in range(len(origins))]
    groups: Dict[pd.Period, List[int]] = {}
    for i, origin in enumerate(origins):
        groups.setdefault(origin.asfreq("Q"), []).append(i)
    return list(groups.values())


def run_backtest(
    panel: MixedFrequencyPanel,
    config: RunConfig,
    origins: Optional[Sequence[str]] = None,
    n_jobs: Optional[int] = None,
) -> BacktestResult:
    if config.series:
        panel = panel.subset(config.series)
    origin_list = [pd.Period(o, freq="M") for o in origins] if origins else resolve_origins(config, panel)
    series = config.backtest.target_series
    if series is None:
        if not panel.quarterly_index:
            raise SchemaError("panel has no quarterly series to nowcast")
        series = panel.series[panel.quarterly_index[0]]
    elif series not in panel.series:
        raise ConfigError("target series is not in the panel", series=series)

    seeds = np.random.SeedSequence(config.sampler.seed).spawn(len(origin_list))
    groups = _groups(origin_list, config.backtest.refit)
    logger.info(
        "Backtest: %d origins in %d fit groups (refit=%s)",
        len(origin_list),
        len(groups),
        config.backtest.refit,
        extra={"event": "backtest"},
    )
    results = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        delayed(_run_group)(panel, config, [origin_list[i] for i in g], [seeds[i] for i in g], series)
        for g in groups
    )
    records: List[BacktestRecord] = []
    draws: Dict[str, np.ndarray] = {}
    for group in results:
        for record, quarterly in group:
            records.append(record)
            if quarterly is not None:
                draws[record.origin] = quarterly
    records.sort(key=lambda r: r.origin)
    result = BacktestResult(records=records, draws=draws, provenance=provenance_block(config))
    if result.failures:
        logger.warning("%d origins failed", len(result.failures), extra={"event": "backtest"})
    return result


def write_backtest(result: BacktestResult, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    frame = result.to_frame()
    for key, value in sorted(result.provenance.items()):
        frame[key] = value
    path = os.path.join(directory, RESULTS_FILE)
    frame.to_csv(path, index=False)
    np.savez_compressed(os.path.join(directory, DRAWS_FILE), **result.draws)
    logger.info("Backtest written to %s", path, extra={"event": "backtest"})
    return path


def load_backtest(directory: str) -> BacktestResult:
    path = os.path.join(directory, RESULTS_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    frame = pd.read_csv(path, dtype={"origin": str, "quarter": str, "error": str, "config_hash": str, "code_version": str})
    provenance_keys = [k for k in ("code_version", "config_hash", "format_version") if k in frame.columns]
    provenance = {k: frame[k].iloc[0] for k in provenance_keys} if len(frame) else {}
    if "format_version" in provenance:
        provenance["format_version"] = int(provenance["format_version"])
    fields = BacktestRecord.model_fields
    records = []
    for row in frame.to_dict(orient="records"):
        clean = {k: v for k, v in row.items() if k in fields}
        clean["error"] = "" if pd.isna(clean.get("error")) else str(clean["error"])
        records.append(BacktestRecord(**clean))
    draws_path = os.path.join(directory, DRAWS_FILE)
    draws: Dict[str, np.ndarray] = {}
    if os.path.exists(draws_path):
        with np.load(draws_path) as npz:
            draws = {key: npz[key] for key in npz.files}
    return BacktestResult(records=records, draws=draws, provenance=provenance)
