"""
MCMC driver
===========
Each sweep: Gibbs pass over the equations -> effect-size projection of the
forest fits -> state-space build -> FFBS draw of the missing monthly values.
Draws after burn-in (thinned) are stored with their completed panels.
"""

from __future__ import annotations

import logging
import sys
from typing import List, Optional, Union

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from app.core.config import settings
from app.core.errors import BavartError, ChainMismatchError, NonFiniteError
from app.core.run_config import RunConfig
from app.statespace.builder import build_state_space, stack_state
from app.statespace.ffbs import constraint_violation, ffbs_draw
from app.statespace.panel import MixedFrequencyPanel
from app.statespace.projection import EffectSizeMatrix, effect_size_projection, projection_residual
from app.system.chain import Chain, SweepDiagnostics
from app.system.checkpoint import load_chain, save_chain
from app.system.gibbs import SystemDraw, SystemHyper, gibbs_sweep
from app.system.lags import build_lag_matrix

logger = logging.getLogger(__name__)

MAX_CONSECUTIVE_FAILURES = 10

SeedLike = Union[int, np.random.SeedSequence, None]


def _progress_enabled() -> bool:
    return settings.PROGRESS and sys.stderr.isatty()


def linear_surrogate(draw: SystemDraw, x: np.ndarray, hyper: SystemHyper) -> EffectSizeMatrix:
    """Effect-size projection of the current fits; tree fits always get a constant column."""
    intercept = hyper.intercept or hyper.mode == "bavart"
    return effect_size_projection(x, draw.fitted, intercept=intercept)


def latent_step(
    draw: SystemDraw,
    filled: np.ndarray,
    panel: MixedFrequencyPanel,
    hyper: SystemHyper,
    config: RunConfig,
    rng: Optional[np.random.Generator],
) -> tuple[np.ndarray, float]:
    """Project the current fits, build the linear state space and draw the latent months."""
    x = build_lag_matrix(filled, hyper.p)
    effect = linear_surrogate(draw, x, hyper)
    rms = float(np.sqrt(np.mean(projection_residual(x, draw.fitted, effect) ** 2)))
    n_blocks = max(hyper.p, 5)
    spec = build_state_space(
        effect,
        draw.sigma,
        panel,
        init_mean=stack_state(filled, n_blocks - 1, n_blocks),
        diffuse_variance=config.statespace.diffuse_variance,
        jitter=config.statespace.measurement_jitter,
    )
    return ffbs_draw(spec, panel, rng), rms


def run_mcmc(
    panel: MixedFrequencyPanel,
    config: RunConfig,
    seed: SeedLike = None,
    chain_id: int = 0,
    checkpoint_path: Optional[str] = None,
    resume: Optional[str] = None,
) -> Chain:
    sampler = config.sampler
    rng = np.random.default_rng(sampler.seed if seed is None else seed)
    start_fill = panel.initial_fill()
    hyper = SystemHyper.calibrate(start_fill, config)

    if resume is not None:
        chain = load_chain(resume)
        chain.check_compatible(config.config_hash(), panel.series)
        if chain.current is None or chain.rng_state is None:
            raise ChainMismatchError("checkpoint has no resumable state", path=resume)
        if chain.dates != tuple(str(d) for d in panel.dates):
            raise ChainMismatchError("checkpoint covers different months", path=resume)
        rng.bit_generator.state = chain.rng_state
        draw, filled = chain.current, np.asarray(chain.current_filled)
        draw.fitted = draw.conditional_mean(build_lag_matrix(filled, hyper.p), hyper)
        logger.info("Resuming chain at sweep %d", chain.sweeps_done, extra={"event": "chain", "chain": chain_id})
    else:
        chain = Chain(
            chain_id=chain_id,
            config_hash=config.config_hash(),
            mode=sampler.mode,
            series=tuple(panel.series),
            dates=tuple(str(d) for d in panel.dates),
        )
        draw, filled = SystemDraw.initial(hyper), start_fill
    chain.hyper = hyper

    failures = 0
    every = settings.CHECKPOINT_EVERY
    bar = tqdm(
        range(chain.sweeps_done, sampler.sweeps),
        desc=f"chain {chain_id}",
        disable=not _progress_enabled(),
        leave=False,
    )
    try:
        for sweep in bar:
            try:
                new_draw = gibbs_sweep(draw, filled, hyper, rng)
                new_filled, rms = latent_step(new_draw, filled, panel, hyper, config, rng)
            except (BavartError, np.linalg.LinAlgError) as exc:
                failures += 1
                logger.warning(
                    "Sweep failed, keeping previous state: %s",
                    exc,
                    extra={"event": "sweep", "chain": chain_id, "sweep": sweep},
                )
                chain.diagnostics.append(SweepDiagnostics(sweep, 0.0, float("nan"), float("nan"), failed=True))
                if failures >= MAX_CONSECUTIVE_FAILURES:
                    raise NonFiniteError("too many consecutive failed sweeps", chain=chain_id, sweep=sweep) from exc
                chain.sweeps_done = sweep + 1
                continue
            failures = 0
            draw, filled = new_draw, new_filled

            violation = constraint_violation(panel, filled)
            if violation > config.statespace.constraint_tol:
                logger.warning(
                    "Intertemporal constraint violated by %.2e",
                    violation,
                    extra={"event": "ffbs", "chain": chain_id, "sweep": sweep},
                )
            chain.diagnostics.append(
                SweepDiagnostics(sweep, draw.diagnostics.get("acceptance", 0.0), rms, violation)
            )
            if sweep >= sampler.burn and (sweep - sampler.burn) % sampler.thin == 0:
                chain.draws.append(draw)
                chain.filled.append(filled)
            chain.sweeps_done = sweep + 1
            chain.current, chain.current_filled = draw, filled

            if checkpoint_path and every and chain.sweeps_done % every == 0:
                chain.rng_state = rng.bit_generator.state
                save_chain(chain, checkpoint_path)
    except KeyboardInterrupt:
        if checkpoint_path:
            chain.current, chain.current_filled = draw, filled
            chain.rng_state = rng.bit_generator.state
            save_chain(chain, checkpoint_path)
            logger.warning("Interrupted; resumable checkpoint at %s", checkpoint_path, extra={"event": "checkpoint"})
        raise
    finally:
        bar.close()

    chain.current, chain.current_filled = draw, filled
    chain.rng_state = rng.bit_generator.state
    if checkpoint_path:
        save_chain(chain, checkpoint_path)
    logger.info(
        "Chain finished: %d sweeps, %d stored draws",
        chain.sweeps_done,
        chain.n_draws,
        extra={"event": "chain", "chain": chain_id},
    )
    return chain


def chain_seeds(master_seed: int, n_chains: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(n_chains)


def run_chains(
    panel: MixedFrequencyPanel,
    config: RunConfig,
    n_chains: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> List[Chain]:
    """Independent chains with seeds spawned from the master seed."""
    n_chains = n_chains or config.sampler.chains
    if n_chains == 1:
        return [run_mcmc(panel, config)]
    seeds = chain_seeds(config.sampler.seed, n_chains)
    return Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        delayed(run_mcmc)(panel, config, seed=seq, chain_id=i) for i, seq in enumerate(seeds)
    )
