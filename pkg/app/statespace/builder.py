"""
State-space form of the linearised system
=========================================
State ``s_t = (y_t, y_{t-1}, ..., y_{t-nb+1})`` with ``nb = max(p, 5)`` monthly
blocks of M entries.  The transition is the VAR companion matrix built from
``A_tilde'``; the shock only enters the first block with covariance Sigma.

Filtering starts at ``t0 = nb - 1``: the initial state holds months
``0 .. t0`` under a diffuse Gaussian prior.  Every observation is an exact
(noise-free) linear measurement of the state:

* a monthly series observed at month s: a selector of block ``t - s``;
* a quarterly series observed at quarter-end s >= 4: the five aggregation
  weights across blocks ``t - s .. t - s + 4``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app.core.errors import DimensionError
from app.statespace.aggregation import N_WEIGHTS, WEIGHTS
from app.statespace.panel import MixedFrequencyPanel
from app.statespace.projection import EffectSizeMatrix

logger = logging.getLogger(__name__)


@dataclass
class Measurement:
    rows: np.ndarray  # (m_t, n)
    values: np.ndarray  # (m_t,)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


@dataclass
class StateSpaceSpec:
    transition: np.ndarray  # (n, n)
    intercept: np.ndarray  # (n,)
    shock_cov: np.ndarray  # (M, M), enters block 0 only
    M: int
    n_blocks: int
    T: int
    init_mean: np.ndarray
    init_cov: np.ndarray
    measurements: List[Measurement] = field(default_factory=list)  # one per t in t0 .. T-1
    jitter: float = 0.0

    @property
    def state_dim(self) -> int:
        return self.M * self.n_blocks

    @property
    def t0(self) -> int:
        return self.n_blocks - 1

    def measurement_at(self, t: int) -> Measurement:
        return self.measurements[t - self.t0]

    def state_noise(self) -> np.ndarray:
        q = np.zeros((self.state_dim, self.state_dim))
        q[: self.M, : self.M] = self.shock_cov
        return q


def companion_matrix(a_tilde: np.ndarray, M: int, n_blocks: int) -> np.ndarray:
    """Transition for ``s_{t+1}``: first block row holds the lag coefficients ``A_l'``."""
    K = a_tilde.shape[0]
    if K % M != 0 or a_tilde.shape[1] != M:
        raise DimensionError("A_tilde is not K x M with K a multiple of M", shape=a_tilde.shape, M=M)
    p = K // M
    if p > n_blocks:
        raise DimensionError("more lags than companion blocks", p=p, n_blocks=n_blocks)
    n = M * n_blocks
    trans = np.zeros((n, n))
    for lag in range(p):
        trans[:M, lag * M : (lag + 1) * M] = a_tilde[lag * M : (lag + 1) * M, :].T
    trans[M:, : n - M] = np.eye(n - M)
    return trans


def _selector(n: int, M: int, block: int, var: int) -> np.ndarray:
    row = np.zeros(n)
    row[block * M + var] = 1.0
    return row


def _aggregation_row(n: int, M: int, first_block: int, var: int) -> np.ndarray:
    row = np.zeros(n)
    for k in range(N_WEIGHTS):
        row[(first_block + k) * M + var] = WEIGHTS[k]
    return row


def _measurement(panel: MixedFrequencyPanel, t: int, months: range, n_blocks: int) -> Measurement:
    """Rows observing months in *months* through the state at time *t*."""
    M = panel.M
    n = M * n_blocks
    values = panel.values
    quarterly = set(panel.quarterly_index)
    rows: List[np.ndarray] = []
    obs: List[float] = []
    for s in months:
        block = t - s
        for var in range(M):
            value = values[s, var]
            if not np.isfinite(value):
                continue
            if var in quarterly:
                # quarter-end rows need months s-4 .. s inside the state and the sample
                if s < N_WEIGHTS - 1 or block + N_WEIGHTS - 1 >= n_blocks:
                    continue
                rows.append(_aggregation_row(n, M, block, var))
            else:
                rows.append(_selector(n, M, block, var))
            obs.append(float(value))
    if rows:
        return Measurement(np.vstack(rows), np.asarray(obs))
    return Measurement(np.zeros((0, n)), np.zeros(0))


def build_state_space(
    effect: EffectSizeMatrix,
    sigma: np.ndarray,
    panel: MixedFrequencyPanel,
    init_mean: Optional[np.ndarray] = None,
    diffuse_variance: float = 1e7,
    jitter: float = 0.0,
) -> StateSpaceSpec:
    M = panel.M
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (M, M):
        raise DimensionError("Sigma must be M x M", shape=sigma.shape, M=M)
    if effect.M != M:
        raise DimensionError("A_tilde and panel disagree on M", a_tilde=effect.a_tilde.shape, M=M)
    p = effect.K // M
    n_blocks = max(p, N_WEIGHTS)
    if panel.T < n_blocks:
        raise DimensionError("panel shorter than the companion state", T=panel.T, n_blocks=n_blocks)

    n = M * n_blocks
    trans = companion_matrix(effect.a_tilde, M, n_blocks)
    intercept = np.zeros(n)
    if effect.intercept is not None:
        intercept[:M] = effect.intercept

    t0 = n_blocks - 1
    if init_mean is None:
        init_mean = np.zeros(n)
    init_mean = np.asarray(init_mean, dtype=float)
    if init_mean.shape != (n,):
        raise DimensionError("initial mean has the wrong size", shape=init_mean.shape, n=n)

    measurements = [_measurement(panel, t0, range(0, t0 + 1), n_blocks)]
    for t in range(t0 + 1, panel.T):
        measurements.append(_measurement(panel, t, range(t, t + 1), n_blocks))

    return StateSpaceSpec(
        transition=trans,
        intercept=intercept,
        shock_cov=0.5 * (sigma + sigma.T),
        M=M,
        n_blocks=n_blocks,
        T=panel.T,
        init_mean=init_mean,
        init_cov=diffuse_variance * np.eye(n),
        measurements=measurements,
        jitter=jitter,
    )


def stack_state(filled: np.ndarray, t: int, n_blocks: int) -> np.ndarray:
    """``(y_t, ..., y_{t-nb+1})`` from a complete T x M panel."""
    return np.concatenate([filled[t - k] for k in range(n_blocks)])
