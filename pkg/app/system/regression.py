"""Conjugate Gaussian regression draws shared by the loading and coefficient blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from app.core.errors import DimensionError, require_finite
from app.system.horseshoe import HorseshoeState


@dataclass
class EquationView:
    target: np.ndarray  # (T,)
    covariates: np.ndarray  # (T, K)
    shock_regressors: np.ndarray  # (T, j) shocks of the earlier equations

    @property
    def n_loadings(self) -> int:
        return int(self.shock_regressors.shape[1])


def loading_slice(equation: int) -> slice:
    """Position of row *equation*'s free Q elements in the stacked loading vector."""
    start = equation * (equation - 1) // 2
    return slice(start, start + equation)


def sample_gaussian_regression(
    x: np.ndarray,
    y: np.ndarray,
    sigma2: float,
    prior_var: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw beta ~ N(m, Omega), Omega = (X'X/sigma2 + V^-1)^-1, m = Omega X'y / sigma2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prior_var = np.asarray(prior_var, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or prior_var.shape != (x.shape[1],):
        raise DimensionError("regression inputs are not aligned", x=x.shape, y=y.shape, prior=prior_var.shape)
    if x.shape[1] == 0:
        return np.zeros(0)
    require_finite("regression input", x, y, prior_var)
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")

    precision = x.T @ x / sigma2 + np.diag(1.0 / prior_var)
    chol = linalg.cho_factor(precision, lower=True)
    mean = linalg.cho_solve(chol, x.T @ y / sigma2)
    # L L' = precision, so L'^-1 z has covariance precision^-1
    z = rng.standard_normal(x.shape[1])
    draw = mean + linalg.solve_triangular(chol[0], z, lower=True, trans="T")
    require_finite("regression draw", draw)
    return draw


def sample_q(
    view: EquationView,
    f_fit: np.ndarray,
    sigma2_j: float,
    hs: HorseshoeState,
    rng: np.random.Generator,
    equation: int,
) -> np.ndarray:
    """Loadings of equation *equation* (0-based) on the earlier equations' shocks."""
    if equation == 0:
        return np.zeros(0)
    prior_var = hs.prior_variance()[loading_slice(equation)]
    resid = np.asarray(view.target, dtype=float) - np.asarray(f_fit, dtype=float)
    return sample_gaussian_regression(view.shock_regressors, resid, sigma2_j, prior_var, rng)
