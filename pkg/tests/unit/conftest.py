import numpy as np
import pandas as pd
import pytest

from app.core.run_config import RunConfig, SimulationSettings
from app.datasets.simulate import simulate_panel


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_config() -> RunConfig:
    """A few sweeps of a small forest; enough to exercise every step."""
    return RunConfig(
        sampler={"sweeps": 6, "burn": 2, "lags": 2, "seed": 11},
        bart={"trees": 5},
        simulation={"n_months": 48, "n_monthly": 2, "seed": 3},
        backtest={"min_train_months": 24},
        evaluation={"bootstrap_reps": 200},
    )


@pytest.fixture
def sim_panel(small_config: RunConfig):
    return simulate_panel(small_config.simulation, np.random.default_rng(small_config.simulation.seed))


@pytest.fixture
def linear_sim():
    settings = SimulationSettings(n_months=60, n_monthly=2, noise_scale=0.5)
    return simulate_panel(settings, np.random.default_rng(5))


@pytest.fixture
def synthetic_backtest():
    """Twelve scored origins (four per month of the quarter) and one failure."""
    from app.nowcast.backtest import BacktestRecord, BacktestResult

    rng = np.random.default_rng(8)
    records, draws = [], {}
    for k, origin in enumerate(pd.period_range("2015-01", periods=12, freq="M")):
        sample = rng.normal(0.5, 1.0, size=400)
        realized = float(rng.normal(0.5, 1.0))
        q = np.quantile(sample, [0.05, 0.10, 0.25, 0.5, 0.75, 0.9, 0.95])
        records.append(
            BacktestRecord(
                origin=str(origin),
                panel_id="sim",
                series="GDP",
                quarter=str(origin.asfreq("Q")),
                month_in_quarter=(origin.month - 1) % 3 + 1,
                n_draws=400,
                mean=float(sample.mean()),
                q05=q[0], q10=q[1], q25=q[2], q50=q[3], q75=q[4], q90=q[5], q95=q[6],
                realized=realized,
            )
        )
        draws[str(origin)] = sample
    records.append(
        BacktestRecord(
            origin="2016-01", panel_id="sim", series="GDP", quarter="2016Q1", month_in_quarter=1,
            status="failed", error="synthetic",
        )
    )
    provenance = {"format_version": 1, "code_version": "0.1.0", "config_hash": "ab" * 32}
    return BacktestResult(records=records, draws=draws, provenance=provenance)
