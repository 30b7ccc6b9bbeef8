"""
Equation-by-equation Gibbs sweep
================================
Sigma = Q H Q' with Q unit lower-triangular, so equation j reads

    y_j = f_j(X) + Z_j q_j + eta_j,    eta_j ~ N(0, H_j),

where Z_j stacks the shocks eta_1 .. eta_{j-1} of the current draw.  Each
equation's target is scaled once (from the starting panel) to [-0.5, 0.5];
the trees and sigma_j^2 live on that scale while q_j and H stay in raw units.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from app.bart.priors import (
    BartHyper,
    CovariateSupport,
    ScaledTarget,
    ar_residual_std,
    calibrate_sigma_prior,
    sample_sigma2,
)
from app.bart.sampler import ResidualState, sample_tree
from app.bart.tree import Forest
from app.core.errors import DimensionError, require_finite
from app.core.run_config import HorseshoeSettings, RunConfig
from app.system.horseshoe import HorseshoeState, sample_horseshoe
from app.system.lags import build_lag_matrix
from app.system.regression import EquationView, sample_gaussian_regression, sample_q

logger = logging.getLogger(__name__)

# Prior variance of the (unshrunk) intercept in the linear baseline.
INTERCEPT_PRIOR_VAR = 100.0


@dataclass(frozen=True)
class EquationScale:
    offset: float
    scale: float

    def to_scaled(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def to_raw(self, values: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * np.asarray(values, dtype=float)


@dataclass(frozen=True)
class SystemHyper:
    """Fixed per-run quantities: priors calibrated once from the starting panel."""

    mode: str
    p: int
    M: int
    bart: List[BartHyper]
    scales: List[EquationScale]
    horseshoe: HorseshoeSettings
    intercept: bool = False

    @property
    def K(self) -> int:
        return self.M * self.p

    @classmethod
    def calibrate(cls, filled: np.ndarray, config: RunConfig) -> "SystemHyper":
        filled = np.asarray(filled, dtype=float)
        p = config.sampler.lags
        build_lag_matrix(filled, p)  # history check
        targets = filled[p:]
        base = BartHyper.from_settings(config.bart)
        hypers, scales = [], []
        for j in range(filled.shape[1]):
            scaling = ScaledTarget.from_raw(targets[:, j])
            scaled = scaling.transformed
            nu, xi = calibrate_sigma_prior(ar_residual_std(scaled), scaled.shape[0], base.quantile_v)
            hypers.append(base.with_sigma_prior(nu, xi))
            scales.append(EquationScale(scaling.offset, scaling.scale))
        return cls(
            mode=config.sampler.mode,
            p=p,
            M=filled.shape[1],
            bart=hypers,
            scales=scales,
            horseshoe=config.horseshoe,
            intercept=config.sampler.intercept,
        )


@dataclass
class SystemDraw:
    Q: np.ndarray  # (M, M) unit lower-triangular
    H: np.ndarray  # (M,) raw-scale shock variances
    hs: HorseshoeState  # over the free elements of Q
    forests: Optional[List[Forest]] = None
    linear_A: Optional[np.ndarray] = None  # (K, M)
    intercept: Optional[np.ndarray] = None  # (M,) linear baseline only
    hs_A: Optional[HorseshoeState] = None  # over vec(A) in the linear baseline
    sigma2_scaled: Optional[np.ndarray] = None  # (M,) tree-scale variances
    fitted: Optional[np.ndarray] = field(default=None, repr=False)  # (T-p, M) raw conditional means
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def initial(cls, hyper: SystemHyper) -> "SystemDraw":
        M = hyper.M
        sigma2_scaled = np.array([h.xi for h in hyper.bart], dtype=float)
        H = np.array([s2 * sc.scale**2 for s2, sc in zip(sigma2_scaled, hyper.scales)])
        hs = HorseshoeState.initial(M * (M - 1) // 2)
        if hyper.mode == "linear":
            return cls(
                Q=np.eye(M),
                H=H,
                hs=hs,
                linear_A=np.zeros((hyper.K, M)),
                intercept=np.zeros(M) if hyper.intercept else None,
                hs_A=HorseshoeState.initial(hyper.K * M),
                sigma2_scaled=sigma2_scaled,
            )
        return cls(
            Q=np.eye(M),
            H=H,
            hs=hs,
            forests=[Forest.stumps(h.S) for h in hyper.bart],
            sigma2_scaled=sigma2_scaled,
        )

    @property
    def sigma(self) -> np.ndarray:
        return self.Q @ np.diag(self.H) @ self.Q.T

    def free_loadings(self) -> np.ndarray:
        rows, cols = np.tril_indices(self.Q.shape[0], k=-1)
        return self.Q[rows, cols]

    def conditional_mean(self, x: np.ndarray, hyper: SystemHyper) -> np.ndarray:
        """Raw-scale f(X) for every row of *x*, one column per equation."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.linear_A is not None:
            out = x @ self.linear_A
            if self.intercept is not None:
                out = out + self.intercept
            return out
        if self.forests is None:
            raise DimensionError("draw holds neither forests nor linear coefficients")
        return np.column_stack(
            [scale.to_raw(forest.predict(x)) for forest, scale in zip(self.forests, hyper.scales)]
        )


def _equation_tree_pass(
    forest: Forest,
    x: np.ndarray,
    target: np.ndarray,
    sigma2: float,
    hyper: BartHyper,
    rng: np.random.Generator,
) -> tuple[Forest, np.ndarray, int, int]:
    # X moves with every latent draw: thresholds snap to its support before the fit cache is rebuilt.
    support = CovariateSupport.from_matrix(x)
    forest = forest.snapped(support.values)
    state = ResidualState.build(forest, x, target, support=support)
    for s in range(forest.S):
        forest = sample_tree(s, forest, state, sigma2, hyper, rng)
    return forest, state.total.copy(), state.accepted, state.proposed


def gibbs_sweep(
    draw: SystemDraw,
    filled: np.ndarray,
    hyper: SystemHyper,
    rng: np.random.Generator,
) -> SystemDraw:
    """One pass over the equations followed by the horseshoe update.

    *filled* is the complete T x M monthly panel.  *draw* is not modified;
    a failure part-way leaves the caller holding the previous state.
    """
    filled = np.asarray(filled, dtype=float)
    if filled.shape[1] != hyper.M:
        raise DimensionError("panel width does not match the system", M=filled.shape[1], expected=hyper.M)
    x = build_lag_matrix(filled, hyper.p)
    y = filled[hyper.p :]
    T_eff, M = y.shape

    Q = np.eye(M)
    H = np.empty(M)
    sigma2_scaled = np.empty(M)
    fitted = np.empty((T_eff, M))
    shocks = np.empty((T_eff, M))
    forests: Optional[List[Forest]] = [] if hyper.mode == "bavart" else None
    linear_A = np.empty((hyper.K, M)) if hyper.mode == "linear" else None
    intercept = np.empty(M) if (hyper.mode == "linear" and hyper.intercept) else None
    accepted = proposed = 0

    for j in range(M):
        view = EquationView(target=y[:, j], covariates=x, shock_regressors=shocks[:, :j])
        q_old = draw.Q[j, :j]
        scale = hyper.scales[j]
        bart = hyper.bart[j]
        adjusted = view.target - view.shock_regressors @ q_old

        if hyper.mode == "bavart":
            assert draw.forests is not None
            forest, total, acc, prop = _equation_tree_pass(
                draw.forests[j], x, scale.to_scaled(adjusted), float(draw.sigma2_scaled[j]), bart, rng
            )
            forests.append(forest)
            f_j = scale.to_raw(total)
            accepted += acc
            proposed += prop
        else:
            prior_var = draw.hs_A.prior_variance().reshape(hyper.K, M)[:, j]
            design = x
            if intercept is not None:
                design = np.column_stack([np.ones(T_eff), x])
                prior_var = np.concatenate([[INTERCEPT_PRIOR_VAR], prior_var])
            coef = sample_gaussian_regression(design, adjusted, float(draw.H[j]), prior_var, rng)
            if intercept is not None:
                intercept[j], coef = coef[0], coef[1:]
            linear_A[:, j] = coef
            f_j = x @ coef + (intercept[j] if intercept is not None else 0.0)

        q_j = sample_q(view, f_j, float(draw.H[j]), draw.hs, rng, equation=j)
        Q[j, :j] = q_j

        resid = view.target - f_j - view.shock_regressors @ q_j
        sigma2_scaled[j] = sample_sigma2(resid / scale.scale, bart.nu, bart.xi, rng)
        H[j] = sigma2_scaled[j] * scale.scale**2
        fitted[:, j] = f_j
        shocks[:, j] = resid

    rows, cols = np.tril_indices(M, k=-1)
    hs = sample_horseshoe(Q[rows, cols], draw.hs, rng, hyper.horseshoe)
    hs_A = None
    if linear_A is not None:
        hs_A = sample_horseshoe(linear_A.ravel(), draw.hs_A, rng, hyper.horseshoe)

    require_finite("system draw", Q, H, fitted)
    if linear_A is not None:
        require_finite("linear coefficients", linear_A)

    diagnostics = {"acceptance": accepted / proposed if proposed else 0.0}
    return replace(
        draw,
        Q=Q,
        H=H,
        hs=hs,
        forests=forests,
        linear_A=linear_A,
        intercept=intercept,
        hs_A=hs_A,
        sigma2_scaled=sigma2_scaled,
        fitted=fitted,
        diagnostics=diagnostics,
    )
