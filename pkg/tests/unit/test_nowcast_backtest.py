import numpy as np
import pytest

from app.core.errors import ConfigError
from app.core.run_config import RunConfig
from app.datasets.simulate import simulate_panel
from app.evaluation.report import build_report
from app.nowcast.backtest import DRAWS_FILE, RESULTS_FILE, load_backtest, resolve_origins, run_backtest, write_backtest


def test_two_origins_two_records(sim_panel, small_config):
    result = run_backtest(sim_panel.panel, small_config, origins=["2003-04", "2003-05"], n_jobs=1)
    assert [r.origin for r in result.records] == ["2003-04", "2003-05"]
    assert [r.month_in_quarter for r in result.records] == [1, 2]
    assert all(r.status == "ok" for r in result.records)
    assert set(result.draws) == {"2003-04", "2003-05"}
    realized = 3.0 * sim_panel.panel.values[sim_panel.panel.index_of("2003-06"), 0]
    assert result.records[0].realized == pytest.approx(realized)
    assert result.records[0].mean == pytest.approx(float(np.mean(result.draws["2003-04"])))
    assert result.provenance["config_hash"] == small_config.config_hash()


def test_backtest_is_reproducible(sim_panel, small_config):
    a = run_backtest(sim_panel.panel, small_config, origins=["2003-04", "2003-05"], n_jobs=1)
    b = run_backtest(sim_panel.panel, small_config, origins=["2003-04", "2003-05"], n_jobs=1)
    assert a.to_frame().equals(b.to_frame())
    for origin in a.draws:
        assert np.array_equal(a.draws[origin], b.draws[origin])


def test_quarterly_refit_shares_one_fit(sim_panel, small_config):
    config = small_config.model_copy(
        update={"backtest": small_config.backtest.model_copy(update={"refit": "quarterly"})}
    )
    result = run_backtest(sim_panel.panel, config, origins=["2003-04", "2003-05", "2003-06"], n_jobs=1)
    assert [r.status for r in result.records] == ["ok", "ok", "ok"]
    assert [r.month_in_quarter for r in result.records] == [1, 2, 3]


def test_short_history_origin_is_recorded_as_failed(sim_panel, small_config):
    result = run_backtest(sim_panel.panel, small_config, origins=["2001-02", "2003-05"], n_jobs=1)
    assert [r.status for r in result.records] == ["failed", "ok"]
    assert "months" in result.records[0].error
    assert "2001-02" not in result.draws
    assert len(result.failures) == 1


def test_written_backtest_loads_back(sim_panel, small_config, tmp_path):
    result = run_backtest(sim_panel.panel, small_config, origins=["2001-02", "2003-05"], n_jobs=1)
    write_backtest(result, str(tmp_path))
    assert (tmp_path / RESULTS_FILE).exists() and (tmp_path / DRAWS_FILE).exists()
    loaded = load_backtest(str(tmp_path))
    assert loaded.provenance == result.provenance
    assert [r.origin for r in loaded.records] == ["2001-02", "2003-05"]
    assert loaded.records[1].mean == result.records[1].mean
    assert loaded.records[1].q95 == result.records[1].q95
    assert loaded.records[0].error == result.records[0].error
    assert np.array_equal(loaded.draws["2003-05"], result.draws["2003-05"])


def test_origins_come_from_the_config(sim_panel, small_config):
    config = small_config.model_copy(
        update={"backtest": small_config.backtest.model_copy(update={"first_origin": "2003-01", "n_origins": 3})}
    )
    assert [str(o) for o in resolve_origins(config, sim_panel.panel)] == ["2003-01", "2003-02", "2003-03"]
    with pytest.raises(ConfigError):
        resolve_origins(small_config, sim_panel.panel)


def test_unknown_target_series(sim_panel, small_config):
    config = small_config.model_copy(
        update={"backtest": small_config.backtest.model_copy(update={"target_series": "CAR"})}
    )
    with pytest.raises(ConfigError):
        run_backtest(sim_panel.panel, config, origins=["2003-05"], n_jobs=1)


def _simulated_backtest(config: RunConfig):
    sim = simulate_panel(config.simulation, np.random.default_rng(config.simulation.seed))
    result = run_backtest(sim.panel, config, n_jobs=1)
    assert not result.failures
    return build_report(result, config.evaluation)


@pytest.mark.slow
def test_correct_linear_model_is_calibrated():
    config = RunConfig(
        sampler={"mode": "linear", "lags": 1, "sweeps": 140, "burn": 40, "seed": 21},
        simulation={"n_months": 240, "n_monthly": 1, "seed": 17},
        backtest={"first_origin": "2003-04", "n_origins": 200, "refit": "quarterly"},
        evaluation={"bootstrap_reps": 1000},
    )
    report = _simulated_backtest(config)
    assert report.groups["all"].n == 200
    assert 0.7 <= report.pit["all"].variance <= 1.3
    # same-quarter origins share a target, so serial correlation is judged per month
    low, high = report.pit["month_3"].ar1_interval
    assert low <= 0.0 <= high


@pytest.mark.slow
def test_trees_score_better_than_linear_after_an_outlier():
    bavart = RunConfig(
        sampler={"lags": 1, "sweeps": 500, "burn": 200, "seed": 13},
        bart={"trees": 50},
        simulation={
            "dgp": "threshold_outlier",
            "n_months": 144,
            "n_monthly": 2,
            "outlier_months_from_end": 24,
            "seed": 6,
        },
        # the shock hits 2010-01; every origin comes after it
        backtest={"first_origin": "2010-02", "n_origins": 22, "refit": "quarterly"},
        evaluation={"bootstrap_reps": 200},
    )
    linear = bavart.model_copy(update={"sampler": bavart.sampler.model_copy(update={"mode": "linear"})})
    tree_report = _simulated_backtest(bavart)
    linear_report = _simulated_backtest(linear)
    assert tree_report.groups["all"].n == linear_report.groups["all"].n == 22
    assert tree_report.groups["all"].lps > linear_report.groups["all"].lps


@pytest.mark.slow
def test_nowcasts_improve_through_the_quarter():
    config = RunConfig(
        sampler={"mode": "linear", "lags": 1, "sweeps": 300, "burn": 100, "seed": 5},
        simulation={"n_months": 96, "n_monthly": 2, "shock_correlation": 0.9, "seed": 8},
        backtest={"first_origin": "2003-07", "n_origins": 51, "refit": "quarterly"},
        evaluation={"bootstrap_reps": 200},
    )
    report = _simulated_backtest(config)
    rmse = [report.groups[f"month_{m}"].rmse for m in (1, 2, 3)]
    assert [report.groups[f"month_{m}"].n for m in (1, 2, 3)] == [17, 17, 17]
    assert rmse[1] <= rmse[0] + 0.02
    assert rmse[2] <= rmse[1] + 0.02
