from dataclasses import replace

import numpy as np
import pytest

import app.system.mcmc as mcmc
from app.core.errors import BavartError, ChainMismatchError, NonFiniteError
from app.core.run_config import RunConfig
from app.statespace.ffbs import constraint_violation
from app.system.chain import pool_chains
from app.system.gibbs import SystemDraw, SystemHyper
from app.system.mcmc import linear_surrogate, run_chains, run_mcmc


def test_chain_stores_post_burn_draws(sim_panel, small_config):
    chain = run_mcmc(sim_panel.panel, small_config)
    assert chain.n_draws == 4
    assert chain.sweeps_done == 6
    assert len(chain.diagnostics) == 6
    assert chain.filled_array().shape == (4, sim_panel.panel.T, sim_panel.panel.M)
    assert all(len(d.forests) == sim_panel.panel.M for d in chain.draws)


def test_thinning(sim_panel, small_config):
    config = small_config.model_copy(update={"sampler": small_config.sampler.model_copy(update={"thin": 2})})
    assert run_mcmc(sim_panel.panel, config).n_draws == 2


def test_completed_panels_respect_the_data(sim_panel, small_config):
    panel = sim_panel.panel
    chain = run_mcmc(panel, small_config)
    for filled in chain.filled:
        assert constraint_violation(panel, filled) < 1e-6
        for j in panel.monthly_index:
            seen = panel.obs_mask[:, j]
            assert np.array_equal(filled[seen, j], panel.values[seen, j])


def test_same_seed_same_chain(sim_panel, small_config):
    a = run_mcmc(sim_panel.panel, small_config)
    b = run_mcmc(sim_panel.panel, small_config)
    for da, db in zip(a.draws, b.draws):
        assert np.array_equal(da.Q, db.Q)
        assert np.array_equal(da.H, db.H)
        assert da.forests == db.forests
    assert np.array_equal(a.filled_array(), b.filled_array())


def test_linear_mode_chain(sim_panel, small_config):
    config = small_config.model_copy(
        update={"sampler": small_config.sampler.model_copy(update={"mode": "linear"})}
    )
    chain = run_mcmc(sim_panel.panel, config)
    assert chain.mode == "linear"
    assert chain.draws[0].linear_A.shape == (small_config.sampler.lags * sim_panel.panel.M, sim_panel.panel.M)
    assert chain.draws[0].forests is None


def test_interrupted_chain_resumes_identically(sim_panel, small_config, tmp_path, monkeypatch):
    panel = sim_panel.panel
    reference = run_mcmc(panel, small_config)

    real_sweep = mcmc.gibbs_sweep
    calls = {"n": 0}

    def interrupt_on_fourth(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 4:
            raise KeyboardInterrupt
        return real_sweep(*args, **kwargs)

    path = str(tmp_path / "chain.json")
    monkeypatch.setattr(mcmc, "gibbs_sweep", interrupt_on_fourth)
    with pytest.raises(KeyboardInterrupt):
        run_mcmc(panel, small_config, checkpoint_path=path)
    monkeypatch.setattr(mcmc, "gibbs_sweep", real_sweep)

    resumed = run_mcmc(panel, small_config, checkpoint_path=path, resume=path)
    assert resumed.sweeps_done == reference.sweeps_done
    assert resumed.n_draws == reference.n_draws
    for a, b in zip(resumed.draws, reference.draws):
        assert np.array_equal(a.Q, b.Q)
        assert a.forests == b.forests
    assert np.array_equal(resumed.filled_array(), reference.filled_array())


def test_resume_with_other_config_is_refused(sim_panel, small_config, tmp_path):
    path = str(tmp_path / "chain.json")
    run_mcmc(sim_panel.panel, small_config, checkpoint_path=path)
    other = small_config.model_copy(update={"bart": small_config.bart.model_copy(update={"trees": 7})})
    with pytest.raises(ChainMismatchError):
        run_mcmc(sim_panel.panel, other, resume=path)


def test_failed_sweep_keeps_previous_state(sim_panel, small_config, monkeypatch):
    real_sweep = mcmc.gibbs_sweep
    calls = {"n": 0}

    def fail_once(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise BavartError("synthetic failure")
        return real_sweep(*args, **kwargs)

    monkeypatch.setattr(mcmc, "gibbs_sweep", fail_once)
    chain = run_mcmc(sim_panel.panel, small_config)
    assert chain.diagnostics[0].failed
    assert not chain.diagnostics[1].failed
    assert chain.sweeps_done == 6


def test_repeated_failures_abort(sim_panel, small_config, monkeypatch):
    config = small_config.model_copy(
        update={"sampler": small_config.sampler.model_copy(update={"sweeps": 15, "burn": 5})}
    )

    def always_fail(*args, **kwargs):
        raise BavartError("synthetic failure")

    monkeypatch.setattr(mcmc, "gibbs_sweep", always_fail)
    with pytest.raises(NonFiniteError):
        run_mcmc(sim_panel.panel, config)


def test_independent_chains_pool(sim_panel, small_config):
    chains = run_chains(sim_panel.panel, small_config, n_chains=2, n_jobs=1)
    assert [c.chain_id for c in chains] == [0, 1]
    assert not np.array_equal(chains[0].filled_array(), chains[1].filled_array())
    pooled = pool_chains(chains)
    assert pooled.n_draws == 8


def test_tree_surrogate_always_carries_a_constant(rng):
    y = rng.standard_normal((60, 2))
    hyper = SystemHyper.calibrate(y, RunConfig(sampler={"lags": 1}, bart={"trees": 3}))
    assert hyper.mode == "bavart"
    x = rng.standard_normal((40, 2))
    b = np.array([[0.4, -0.2], [0.1, 0.3]])
    draw = replace(SystemDraw.initial(hyper), fitted=2.0 + x @ b)
    effect = linear_surrogate(draw, x, hyper)
    assert effect.intercept is not None
    assert np.allclose(effect.intercept, 2.0)
    assert np.allclose(effect.a_tilde, b)


@pytest.mark.slow
def test_every_draw_of_a_long_run_aggregates_to_the_quarters(sim_panel, small_config):
    config = small_config.model_copy(
        update={"sampler": small_config.sampler.model_copy(update={"sweeps": 200, "burn": 0})}
    )
    chain = run_mcmc(sim_panel.panel, config)
    assert chain.n_draws == 200
    worst = max(constraint_violation(sim_panel.panel, filled) for filled in chain.filled)
    assert worst < 1e-6
