"""Metropolis-Hastings tree proposals: grow, prune, change and swap."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Literal, Tuple

import numpy as np

from app.bart.priors import CovariateSupport
from app.bart.tree import (
    Internal,
    Leaf,
    Path,
    SplitRule,
    TreeNode,
    get_node,
    internal_paths,
    leaf_paths,
    prunable_paths,
    replace_node,
    swappable_pairs,
)
from app.core.errors import MoveUnavailableError

MoveKind = Literal["grow", "prune", "change", "swap"]

MOVE_PROBS: Dict[str, float] = {"grow": 0.25, "prune": 0.25, "change": 0.40, "swap": 0.10}
_KINDS: Tuple[str, ...] = tuple(MOVE_PROBS)
_PROBS = np.array([MOVE_PROBS[k] for k in _KINDS])


@dataclass(frozen=True)
class MoveProposal:
    tree: TreeNode
    kind: str
    log_proposal_ratio: float  # log q(new -> old) - log q(old -> new)
    path: Path


def available_moves(tree: TreeNode) -> Dict[str, bool]:
    has_internal = isinstance(tree, Internal)
    return {
        "grow": True,
        "prune": has_internal,
        "change": has_internal,
        "swap": has_internal and bool(swappable_pairs(tree)),
    }


def move_kind_prob(tree: TreeNode, kind: str) -> float:
    """Probability of picking *kind* after redrawing unavailable kinds."""
    available = available_moves(tree)
    if not available[kind]:
        return 0.0
    mass = sum(MOVE_PROBS[k] for k, ok in available.items() if ok)
    return MOVE_PROBS[kind] / mass


def draw_move_kind(tree: TreeNode, rng: np.random.Generator) -> str:
    available = available_moves(tree)
    while True:
        kind = _KINDS[int(rng.choice(len(_KINDS), p=_PROBS))]
        if available[kind]:
            return kind


def _draw_rule(support: CovariateSupport, rng: np.random.Generator) -> SplitRule:
    var = int(rng.integers(support.k))
    threshold = float(support.values[var][int(rng.integers(support.n_values(var)))])
    return SplitRule(var, threshold)


def _grow(tree: TreeNode, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    leaves = leaf_paths(tree)
    path = leaves[int(rng.integers(len(leaves)))]
    rule = _draw_rule(support, rng)
    new_tree = replace_node(tree, path, Internal(rule, Leaf(0.0), Leaf(0.0)))
    log_forward = (
        math.log(move_kind_prob(tree, "grow"))
        - math.log(len(leaves))
        - math.log(support.k)
        - math.log(support.n_values(rule.var_index))
    )
    log_backward = math.log(move_kind_prob(new_tree, "prune")) - math.log(len(prunable_paths(new_tree)))
    return MoveProposal(new_tree, "grow", log_backward - log_forward, path)


def _prune(tree: TreeNode, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    candidates = prunable_paths(tree)
    path = candidates[int(rng.integers(len(candidates)))]
    node = get_node(tree, path)
    assert isinstance(node, Internal)
    new_tree = replace_node(tree, path, Leaf(0.0))
    log_forward = math.log(move_kind_prob(tree, "prune")) - math.log(len(candidates))
    log_backward = (
        math.log(move_kind_prob(new_tree, "grow"))
        - math.log(len(leaf_paths(new_tree)))
        - math.log(support.k)
        - math.log(max(support.n_values(node.rule.var_index), 1))
    )
    return MoveProposal(new_tree, "prune", log_backward - log_forward, path)


def _change(tree: TreeNode, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    candidates = internal_paths(tree)
    path = candidates[int(rng.integers(len(candidates)))]
    node = get_node(tree, path)
    assert isinstance(node, Internal)
    rule = _draw_rule(support, rng)
    new_tree = replace_node(tree, path, Internal(rule, node.left, node.right))
    # Forward picks the new threshold among n(new var) values, backward the old one.
    log_ratio = math.log(support.n_values(rule.var_index)) - math.log(
        max(support.n_values(node.rule.var_index), 1)
    )
    return MoveProposal(new_tree, "change", log_ratio, path)


def _swap(tree: TreeNode, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    pairs = swappable_pairs(tree)
    parent_path, child_path = pairs[int(rng.integers(len(pairs)))]
    parent = get_node(tree, parent_path)
    child = get_node(tree, child_path)
    assert isinstance(parent, Internal) and isinstance(child, Internal)
    new_child = Internal(parent.rule, child.left, child.right)
    if child_path[-1] == 0:
        new_parent = Internal(child.rule, new_child, parent.right)
    else:
        new_parent = Internal(child.rule, parent.left, new_child)
    new_tree = replace_node(tree, parent_path, new_parent)
    return MoveProposal(new_tree, "swap", 0.0, child_path)


_MOVES = {"grow": _grow, "prune": _prune, "change": _change, "swap": _swap}


def apply_move(tree: TreeNode, kind: str, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    if not available_moves(tree)[kind]:
        raise MoveUnavailableError(f"{kind} is not available for this tree", kind=kind)
    return _MOVES[kind](tree, support, rng)


def propose_tree_move(tree: TreeNode, support: CovariateSupport, rng: np.random.Generator) -> MoveProposal:
    return apply_move(tree, draw_move_kind(tree, rng), support, rng)
