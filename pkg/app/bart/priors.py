"""Tree, leaf and error-variance priors for a single BART equation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Tuple

import numpy as np
from scipy import stats

from app.bart.tree import Internal, Leaf, SplitRule, TreeNode, iter_nodes
from app.core.errors import DimensionError, NonFiniteError
from app.core.run_config import BartSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BartHyper:
    alpha: float = 0.95
    beta: float = 2.0
    shrink_k: float = 2.0
    S: int = 250
    nu: Optional[float] = None  # set at fit time (T/2)
    xi: Optional[float] = None
    quantile_v: float = 0.75
    vmu_convention: Literal["printed", "chipman"] = "printed"

    @property
    def v_mu(self) -> float:
        root_s = math.sqrt(self.S)
        if self.vmu_convention == "chipman":
            return (0.5 / (self.shrink_k * root_s)) ** 2
        return 1.0 / (2.0 * self.shrink_k * root_s)

    @classmethod
    def from_settings(cls, bart: BartSettings) -> "BartHyper":
        if bart.loose_prior:
            return cls.loose(S=bart.trees)
        return cls(
            alpha=bart.alpha,
            beta=bart.beta,
            shrink_k=bart.shrink_k,
            S=bart.trees,
            quantile_v=bart.quantile_v,
            vmu_convention=bart.vmu_convention,
        )

    @classmethod
    def loose(cls, S: int = 1) -> "BartHyper":
        """Weak depth penalty for single-tree illustrations."""
        return cls(alpha=0.99, beta=0.5, shrink_k=0.5, S=S)

    def with_sigma_prior(self, nu: float, xi: float) -> "BartHyper":
        return replace(self, nu=nu, xi=xi)


@dataclass(frozen=True)
class CovariateSupport:
    """Observed values of every covariate column (threshold candidates)."""

    values: Tuple[np.ndarray, ...]

    @classmethod
    def from_matrix(cls, x: np.ndarray) -> "CovariateSupport":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] == 0:
            raise DimensionError("covariate matrix must be 2-D and non-empty", shape=x.shape)
        return cls(tuple(np.unique(x[:, k]) for k in range(x.shape[1])))

    @property
    def k(self) -> int:
        return len(self.values)

    def n_values(self, var: int) -> int:
        return int(self.values[var].shape[0])

    def contains(self, var: int, threshold: float) -> bool:
        col = self.values[var]
        pos = np.searchsorted(col, threshold)
        return bool(pos < col.shape[0] and col[pos] == threshold)


@dataclass
class ScaledTarget:
    raw: np.ndarray
    offset: float
    scale: float

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> "ScaledTarget":
        raw = np.asarray(raw, dtype=float)
        lo, hi = float(np.min(raw)), float(np.max(raw))
        scale = hi - lo
        if scale <= 0.0:
            scale = 1.0
        return cls(raw=raw, offset=0.5 * (hi + lo), scale=scale)

    @property
    def transformed(self) -> np.ndarray:
        return self.to_scaled(self.raw)

    def to_scaled(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def to_raw(self, values: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * np.asarray(values, dtype=float)


def node_nonterminal_prob(depth: int, hyper: BartHyper) -> float:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    return hyper.alpha * (1.0 + depth) ** (-hyper.beta)


def tree_prior_logpdf(tree: TreeNode, support: CovariateSupport, hyper: BartHyper) -> float:
    """Log prior of the tree structure and its splitting rules."""
    total = 0.0
    log_k = math.log(support.k)
    for path, node in iter_nodes(tree):
        p_split = node_nonterminal_prob(len(path), hyper)
        if isinstance(node, Internal):
            n_thr = max(support.n_values(node.rule.var_index), 1)
            total += math.log(p_split) - log_k - math.log(n_thr)
        else:
            total += math.log1p(-p_split)
    return total


def draw_tree_from_prior(support: CovariateSupport, hyper: BartHyper, rng: np.random.Generator) -> TreeNode:
    """Simulate the tree-generating prior (no data term)."""

    def _grow(depth: int) -> TreeNode:
        if rng.random() >= node_nonterminal_prob(depth, hyper):
            return Leaf(0.0)
        var = int(rng.integers(support.k))
        threshold = float(rng.choice(support.values[var]))
        return Internal(SplitRule(var, threshold), _grow(depth + 1), _grow(depth + 1))

    return _grow(0)


def ar_residual_std(y: np.ndarray, order: int = 5) -> float:
    """OLS residual std of an AR(order) with intercept; sample std when short."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 12 or n - order <= order + 1:
        sigma = float(np.std(y, ddof=1)) if n > 1 else 0.0
    else:
        target = y[order:]
        lags = np.column_stack([y[order - l : n - l] for l in range(1, order + 1)])
        design = np.column_stack([np.ones(target.shape[0]), lags])
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        resid = target - design @ coef
        dof = max(target.shape[0] - design.shape[1], 1)
        sigma = float(np.sqrt(resid @ resid / dof))
    if not np.isfinite(sigma) or sigma <= 0.0:
        # constant series: fall back to a small positive scale
        sigma = max(float(np.std(y)), 1e-6)
    return sigma


def ols_residual_std(x: np.ndarray, y: np.ndarray) -> float:
    """Residual std of a linear regression of *y* on *x* with intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(y.shape[0]), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(y.shape[0] - design.shape[1], 1)
    return max(float(np.sqrt(resid @ resid / dof)), 1e-6)


def calibrate_sigma_prior(residual_std_hat: float, T: int, quantile_v: float) -> Tuple[float, float]:
    """(nu, xi) with nu = T/2 and P(sigma^2 < sigma_hat^2) = quantile_v."""
    if not residual_std_hat > 0.0:
        raise ValueError("residual_std_hat must be positive")
    if T < 1:
        raise ValueError("T must be positive")
    nu = T / 2.0
    q = stats.chi2.ppf(1.0 - quantile_v, df=nu)
    xi = residual_std_hat**2 * q / nu
    return nu, float(xi)


def sigma2_prior_cdf(value: float, nu: float, xi: float) -> float:
    """P(sigma^2 < value) under sigma^2 ~ nu * xi / chi2_nu."""
    return float(stats.chi2.sf(nu * xi / value, df=nu))


def sample_sigma2(residuals: np.ndarray, nu: float, xi: float, rng: np.random.Generator) -> float:
    """Scaled-inverse-chi-square posterior draw given the residuals."""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        raise ValueError("residuals must be non-empty")
    ssr = float(residuals @ residuals)
    draw = (nu * xi + ssr) / rng.chisquare(nu + residuals.shape[0])
    if not np.isfinite(draw) or draw <= 0.0:
        raise NonFiniteError("sigma2 draw is not a positive finite number", ssr=ssr)
    return float(draw)
