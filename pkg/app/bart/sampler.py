"""
Single-equation BART sampler
============================
One sweep visits every tree: an MH step on the tree structure with the leaf
values integrated out, followed by a conjugate Gaussian draw of the leaves.
All quantities live on the scaled target (values in [-0.5, 0.5]).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np

from app.bart.moves import propose_tree_move
from app.bart.priors import (
    BartHyper,
    CovariateSupport,
    ScaledTarget,
    ar_residual_std,
    calibrate_sigma_prior,
    ols_residual_std,
    sample_sigma2,
    tree_prior_logpdf,
)
from app.bart.tree import Forest, Internal, TreeNode, iter_nodes, n_leaves, route, with_leaf_values
from app.core.errors import DimensionError, EmptyLeafError

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


def leaf_stats(assign: np.ndarray, n_leaf: int, residual: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts = np.bincount(assign, minlength=n_leaf).astype(float)
    sums = np.bincount(assign, weights=residual, minlength=n_leaf)
    sumsq = np.bincount(assign, weights=residual * residual, minlength=n_leaf)
    return counts, sums, sumsq


def _log_marginal_from_stats(
    counts: np.ndarray, sums: np.ndarray, sumsq: np.ndarray, sigma2: float, v_mu: float
) -> float:
    # Per leaf: residual ~ N(0, sigma2 I + v_mu J); empty leaves integrate to 1.
    occupied = counts > 0
    n = counts[occupied]
    s = sums[occupied]
    ss = sumsq[occupied]
    quad = (ss - v_mu * s * s / (sigma2 + n * v_mu)) / sigma2
    log_det = n * math.log(sigma2) + np.log1p(n * v_mu / sigma2)
    return float(np.sum(-0.5 * n * _LOG_2PI - 0.5 * log_det - 0.5 * quad))


def log_marginal_likelihood(
    tree: TreeNode,
    x: np.ndarray,
    residual: np.ndarray,
    sigma2: float,
    v_mu: float,
    *,
    allow_empty: bool = False,
) -> float:
    """log p(residual | tree) with every leaf value integrated out."""
    residual = np.asarray(residual, dtype=float)
    if residual.shape[0] == 0:
        raise DimensionError("residual must be non-empty")
    if residual.shape[0] != np.asarray(x).shape[0]:
        raise DimensionError("residual and covariates are not row-aligned")
    if sigma2 <= 0.0 or v_mu <= 0.0:
        raise ValueError("sigma2 and v_mu must be positive")
    n_leaf = n_leaves(tree)
    counts, sums, sumsq = leaf_stats(route(tree, x), n_leaf, residual)
    if not allow_empty and np.any(counts == 0):
        raise EmptyLeafError("tree routes no observations to a leaf", empty=int(np.sum(counts == 0)))
    return _log_marginal_from_stats(counts, sums, sumsq, sigma2, v_mu)


def draw_leaf_values(
    counts: np.ndarray, sums: np.ndarray, sigma2: float, v_mu: float, rng: np.random.Generator
) -> np.ndarray:
    precision = counts / sigma2 + 1.0 / v_mu
    mean = (sums / sigma2) / precision
    return mean + rng.standard_normal(counts.shape[0]) / np.sqrt(precision)


@dataclass
class ResidualState:
    """Per-tree fits and their running sum for one equation."""

    x: np.ndarray
    target: np.ndarray
    support: CovariateSupport
    tree_fits: np.ndarray  # (S, T)
    total: np.ndarray
    assignments: List[np.ndarray]
    proposed: int = 0
    accepted: int = 0

    @classmethod
    def build(
        cls,
        forest: Forest,
        x: np.ndarray,
        target: np.ndarray,
        support: Optional[CovariateSupport] = None,
    ) -> "ResidualState":
        x = np.asarray(x, dtype=float)
        target = np.asarray(target, dtype=float)
        if x.shape[0] != target.shape[0]:
            raise DimensionError("target and covariates are not row-aligned", x=x.shape, target=target.shape)
        assignments = [route(tree, x) for tree in forest.trees]
        fits = np.empty((forest.S, x.shape[0]), dtype=float)
        for s, tree in enumerate(forest.trees):
            mus = np.array([node.mu for _, node in iter_nodes(tree) if not isinstance(node, Internal)])
            fits[s] = mus[assignments[s]]
        return cls(
            x=x,
            target=target,
            support=support if support is not None else CovariateSupport.from_matrix(x),
            tree_fits=fits,
            total=fits.sum(axis=0),
            assignments=assignments,
        )

    def partial_residual(self, s: int) -> np.ndarray:
        return self.target - (self.total - self.tree_fits[s])

    def replace_fit(self, s: int, fit: np.ndarray, assign: np.ndarray) -> None:
        self.total += fit - self.tree_fits[s]
        self.tree_fits[s] = fit
        self.assignments[s] = assign

    def retarget(self, target: np.ndarray) -> None:
        self.target = np.asarray(target, dtype=float)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def sample_tree(
    s: int,
    forest: Forest,
    state: ResidualState,
    sigma2: float,
    hyper: BartHyper,
    rng: np.random.Generator,
) -> Forest:
    """One MH step on tree *s* followed by its leaf draw; updates *state*."""
    residual = state.partial_residual(s)
    current = forest.trees[s]
    v_mu = hyper.v_mu

    cur_assign = state.assignments[s]
    cur_leaves = n_leaves(current)
    cur_stats = leaf_stats(cur_assign, cur_leaves, residual)

    proposal = propose_tree_move(current, state.support, rng)
    state.proposed += 1
    chosen, assign, stats_ = current, cur_assign, cur_stats

    prop_leaves = n_leaves(proposal.tree)
    prop_assign = route(proposal.tree, state.x)
    prop_stats = leaf_stats(prop_assign, prop_leaves, residual)
    if np.all(prop_stats[0] > 0):
        log_alpha = (
            _log_marginal_from_stats(*prop_stats, sigma2, v_mu)
            - _log_marginal_from_stats(*cur_stats, sigma2, v_mu)
            + tree_prior_logpdf(proposal.tree, state.support, hyper)
            - tree_prior_logpdf(current, state.support, hyper)
            + proposal.log_proposal_ratio
        )
        if math.log(rng.random()) < log_alpha:
            chosen, assign, stats_ = proposal.tree, prop_assign, prop_stats
            state.accepted += 1

    counts, sums, _ = stats_
    mus = draw_leaf_values(counts, sums, sigma2, v_mu, rng)
    new_tree = with_leaf_values(chosen, mus)
    state.replace_fit(s, mus[assign], assign)
    return forest.with_tree(s, new_tree)


@dataclass
class BartSampler:
    """Forest plus error variance for one equation, on the scaled target."""

    hyper: BartHyper
    forest: Forest
    sigma2: float
    state: Optional[ResidualState] = None

    @classmethod
    def initialise(cls, hyper: BartHyper) -> "BartSampler":
        if hyper.nu is None or hyper.xi is None:
            raise ValueError("sigma prior (nu, xi) must be calibrated before sampling")
        return cls(hyper=hyper, forest=Forest.stumps(hyper.S), sigma2=float(hyper.xi))

    def bind(self, x: np.ndarray, target: np.ndarray) -> None:
        self.state = ResidualState.build(self.forest, x, target)

    def sweep_trees(self, target: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.state is None:
            raise ValueError("bind() the covariates before sweeping")
        self.state.retarget(target)
        forest = self.forest
        for s in range(forest.S):
            forest = sample_tree(s, forest, self.state, self.sigma2, self.hyper, rng)
        self.forest = forest
        return self.state.total.copy()

    def draw_sigma2(self, residuals: np.ndarray, rng: np.random.Generator) -> float:
        self.sigma2 = sample_sigma2(residuals, self.hyper.nu, self.hyper.xi, rng)
        return self.sigma2


@dataclass
class BartFit:
    scaling: ScaledTarget
    forests: List[Forest] = field(default_factory=list)
    sigma2: List[float] = field(default_factory=list)  # raw scale
    acceptance_rate: float = 0.0

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Raw-scale predictions, one row per stored draw."""
        x = np.asarray(x, dtype=float)
        return np.vstack([self.scaling.to_raw(forest.predict(x)) for forest in self.forests])


def fit_bart(
    x: np.ndarray,
    y: np.ndarray,
    hyper: BartHyper,
    sweeps: int,
    burn: int,
    rng: np.random.Generator,
    sigma_hat: Literal["ar5", "ols"] = "ar5",
) -> BartFit:
    """Stand-alone BART regression of *y* on *x*."""
    x = np.asarray(x, dtype=float)
    scaling = ScaledTarget.from_raw(y)
    target = scaling.transformed
    if sigma_hat == "ols":
        sd = ols_residual_std(x, target)
    else:
        sd = ar_residual_std(target)
    nu, xi = calibrate_sigma_prior(sd, target.shape[0], hyper.quantile_v)
    sampler = BartSampler.initialise(hyper.with_sigma_prior(nu, xi))
    sampler.bind(x, target)

    fit = BartFit(scaling=scaling)
    for sweep in range(sweeps):
        total = sampler.sweep_trees(target, rng)
        sampler.draw_sigma2(target - total, rng)
        if sweep >= burn:
            fit.forests.append(sampler.forest)
            fit.sigma2.append(sampler.sigma2 * scaling.scale**2)
    fit.acceptance_rate = sampler.state.acceptance_rate if sampler.state else 0.0
    logger.info(
        "BART fit done: %d draws kept, MH acceptance %.3f",
        len(fit.forests),
        fit.acceptance_rate,
        extra={"event": "chain"},
    )
    return fit


def predict_bart(fit: BartFit, x: np.ndarray) -> np.ndarray:
    """Posterior-mean prediction on the raw scale."""
    return fit.predict(x).mean(axis=0)
