"""
Forward filtering, backward sampling
====================================
Measurements are exact, so the update uses the Joseph form with a
pseudo-inverse of the innovation covariance.  The transition noise only
touches the first block, so the backward step conditions on the shifted
blocks of ``s_{t+1}`` exactly and treats its first block as a noisy
observation of the oldest block of ``s_t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from app.core.errors import FilterDivergenceError
from app.statespace.aggregation import aggregate_at
from app.statespace.builder import StateSpaceSpec
from app.statespace.panel import MixedFrequencyPanel

logger = logging.getLogger(__name__)


@dataclass
class FilterResult:
    means: List[np.ndarray]  # filtered means, t = t0 .. T-1
    covs: List[np.ndarray]
    t0: int


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def _check(period: int, mean: np.ndarray, cov: np.ndarray) -> None:
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise FilterDivergenceError("filter moments are not finite", period=period)


def _update(mean: np.ndarray, cov: np.ndarray, rows: np.ndarray, values: np.ndarray, jitter: float):
    if values.shape[0] == 0:
        return mean, cov
    noise = jitter * np.eye(values.shape[0])
    innov_cov = rows @ cov @ rows.T + noise
    gain = cov @ rows.T @ np.linalg.pinv(_symmetrize(innov_cov), hermitian=True)
    mean = mean + gain @ (values - rows @ mean)
    joseph = np.eye(cov.shape[0]) - gain @ rows
    cov = joseph @ cov @ joseph.T + gain @ noise @ gain.T
    return mean, _symmetrize(cov)


def kalman_filter(spec: StateSpaceSpec) -> FilterResult:
    means: List[np.ndarray] = []
    covs: List[np.ndarray] = []
    state_noise = spec.state_noise()
    mean, cov = spec.init_mean.copy(), spec.init_cov.copy()
    for t in range(spec.t0, spec.T):
        if t > spec.t0:
            mean = spec.intercept + spec.transition @ mean
            cov = _symmetrize(spec.transition @ cov @ spec.transition.T + state_noise)
        meas = spec.measurement_at(t)
        mean, cov = _update(mean, cov, meas.rows, meas.values, spec.jitter)
        _check(t, mean, cov)
        means.append(mean)
        covs.append(cov)
    return FilterResult(means=means, covs=covs, t0=spec.t0)


def _draw(mean: np.ndarray, cov: np.ndarray, rng: Optional[np.random.Generator]) -> np.ndarray:
    if rng is None:
        return mean
    # eigh tolerates the exactly-singular directions left by noise-free measurements
    vals, vecs = np.linalg.eigh(_symmetrize(cov))
    vals = np.clip(vals, 0.0, None)
    return mean + vecs @ (np.sqrt(vals) * rng.standard_normal(mean.shape[0]))


def backward_sample(
    spec: StateSpaceSpec, filtered: FilterResult, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """Joint draw of the states ``s_t0 .. s_{T-1}``; with ``rng=None`` the smoothed means."""
    M = spec.M
    n = spec.state_dim
    n_u = n - M
    a1 = spec.transition[:M, :n_u]
    a2 = spec.transition[:M, n_u:]
    c = spec.intercept[:M]

    n_steps = len(filtered.means)
    states = np.empty((n_steps, n))
    states[-1] = _draw(filtered.means[-1], filtered.covs[-1], rng)
    for k in range(n_steps - 2, -1, -1):
        mean, cov = filtered.means[k], filtered.covs[k]
        nxt = states[k + 1]
        u = nxt[M:]

        # v | u from the filtered joint
        m_u, m_v = mean[:n_u], mean[n_u:]
        p_uu, p_uv, p_vv = cov[:n_u, :n_u], cov[:n_u, n_u:], cov[n_u:, n_u:]
        reg = p_uv.T @ np.linalg.pinv(p_uu, hermitian=True)
        m_cond = m_v + reg @ (u - m_u)
        p_cond = _symmetrize(p_vv - reg @ p_uv)

        # first block of s_{t+1} observes v through A2 with noise Sigma
        resid = nxt[:M] - c - a1 @ u
        innov_cov = a2 @ p_cond @ a2.T + spec.shock_cov
        gain = p_cond @ a2.T @ np.linalg.pinv(_symmetrize(innov_cov), hermitian=True)
        m_post = m_cond + gain @ (resid - a2 @ m_cond)
        p_post = _symmetrize(p_cond - gain @ a2 @ p_cond)
        _check(filtered.t0 + k, m_post, p_post)

        states[k, :n_u] = u
        states[k, n_u:] = _draw(m_post, p_post, rng)
    return states


def states_to_panel(spec: StateSpaceSpec, states: np.ndarray) -> np.ndarray:
    """Unstack companion states into a complete T x M matrix."""
    M, nb = spec.M, spec.n_blocks
    filled = np.empty((spec.T, M))
    for k in range(nb):
        filled[spec.t0 - k] = states[0, k * M : (k + 1) * M]
    filled[spec.t0 :] = states[:, :M]
    return filled


def _quarterly_constraints(panel: MixedFrequencyPanel, var: int):
    ends = [t for t in range(4, panel.T) if np.isfinite(panel.values[t, var])]
    rows = np.zeros((len(ends), panel.T))
    for r, t in enumerate(ends):
        rows[r, t - 4 : t + 1] = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 9.0
    return rows, panel.values[ends, var]


def enforce_constraints(panel: MixedFrequencyPanel, filled: np.ndarray) -> np.ndarray:
    """Restore observed cells exactly and remove drift from the quarterly identities.

    The quarterly correction is the minimum-norm change to the latent column
    that satisfies every observed quarter-end aggregate.
    """
    out = np.array(filled, dtype=float, copy=True)
    mask = panel.obs_mask
    quarterly = set(panel.quarterly_index)
    for var in range(panel.M):
        if var in quarterly:
            rows, targets = _quarterly_constraints(panel, var)
            if rows.shape[0] == 0:
                continue
            resid = targets - rows @ out[:, var]
            delta, *_ = np.linalg.lstsq(rows, resid, rcond=None)
            out[:, var] += delta
        else:
            out[mask[:, var], var] = panel.values[mask[:, var], var]
    return out


def constraint_violation(panel: MixedFrequencyPanel, filled: np.ndarray) -> float:
    """max |aggregate(latents) - y_Q| over observed quarter-ends (0.0 when there are none)."""
    worst = 0.0
    for var in panel.quarterly_index:
        for t in range(4, panel.T):
            value = panel.values[t, var]
            if np.isfinite(value):
                worst = max(worst, abs(float(aggregate_at(filled[:, var], t)) - value))
    return worst


def min_eigenvalue(cov: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_symmetrize(cov))[0])


def ffbs_draw(
    spec: StateSpaceSpec, panel: MixedFrequencyPanel, rng: Optional[np.random.Generator]
) -> np.ndarray:
    """One draw of the complete monthly panel given every observed row."""
    filtered = kalman_filter(spec)
    states = backward_sample(spec, filtered, rng)
    filled = states_to_panel(spec, states)
    filled = enforce_constraints(panel, filled)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "FFBS draw done: T=%d, violation %.2e",
            spec.T,
            constraint_violation(panel, filled),
            extra={"event": "ffbs"},
        )
    return filled
