"""Horseshoe shrinkage through inverse-gamma auxiliaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from app.core.errors import DimensionError, NonFiniteError
from app.core.run_config import HorseshoeSettings


@dataclass(frozen=True)
class HorseshoeState:
    tau2: np.ndarray  # local scales, one per coefficient
    lambda2: float
    w: np.ndarray
    zeta: float

    @classmethod
    def initial(cls, n: int) -> "HorseshoeState":
        return cls(tau2=np.ones(n), lambda2=1.0, w=np.ones(n), zeta=1.0)

    @property
    def n(self) -> int:
        return int(self.tau2.shape[0])

    def prior_variance(self) -> np.ndarray:
        return self.lambda2 * self.tau2

    def validate(self) -> None:
        if self.w.shape != self.tau2.shape:
            raise DimensionError("tau2 and w must have the same length")
        positive = np.all(self.tau2 > 0) and np.all(self.w > 0) and self.lambda2 > 0 and self.zeta > 0
        finite = np.all(np.isfinite(self.tau2)) and np.isfinite(self.lambda2)
        if not (positive and finite):
            raise NonFiniteError("horseshoe scales must be positive and finite")


def inverse_gamma(shape, scale, rng: np.random.Generator) -> np.ndarray:
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    return stats.invgamma.rvs(shape, scale=scale, size=np.broadcast(shape, scale).shape, random_state=rng)


def sample_horseshoe(
    coefficients: np.ndarray,
    hs: HorseshoeState,
    rng: np.random.Generator,
    settings: HorseshoeSettings | None = None,
) -> HorseshoeState:
    settings = settings or HorseshoeSettings()
    q = np.asarray(coefficients, dtype=float).ravel()
    if q.shape[0] != hs.n:
        raise DimensionError("coefficient count does not match the horseshoe state", n=q.shape[0], hs=hs.n)
    if hs.n == 0:
        return hs
    q2 = q * q

    if settings.linear_lambda_tau_scale:
        tau_scale = 1.0 / hs.w + q2 / (2.0 * np.sqrt(hs.lambda2))
    else:
        tau_scale = 1.0 / hs.w + q2 / (2.0 * hs.lambda2)
    tau2 = inverse_gamma(1.0, tau_scale, rng)

    n = hs.n
    shape = n / 2.0 if settings.half_n_lambda_shape else (n + 1) / 2.0
    lambda2 = float(inverse_gamma(shape, 1.0 / hs.zeta + 0.5 * np.sum(q2 / tau2), rng))

    w = inverse_gamma(1.0, 1.0 + 1.0 / tau2, rng)
    zeta = float(inverse_gamma(1.0, 1.0 + 1.0 / lambda2, rng))

    # keep scales inside floating range
    tau2 = np.clip(tau2, 1e-300, 1e300)
    state = HorseshoeState(tau2=tau2, lambda2=min(max(lambda2, 1e-300), 1e300), w=w, zeta=zeta)
    state.validate()
    return state
