"""
Binary regression trees
=======================
Trees are immutable: every edit returns a new root that shares the untouched
subtrees with the old one.  Nodes are addressed by a *path*, a tuple of
0 (left) / 1 (right) steps from the root.

Routing: an observation goes left iff ``x[var_index] < threshold``; ties go
right.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.errors import DimensionError

Path = Tuple[int, ...]


@dataclass(frozen=True)
class SplitRule:
    var_index: int
    threshold: float


@dataclass(frozen=True)
class Leaf:
    mu: float = 0.0


@dataclass(frozen=True)
class Internal:
    rule: SplitRule
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


def is_leaf(node: TreeNode) -> bool:
    return isinstance(node, Leaf)


def iter_nodes(tree: TreeNode) -> Iterator[Tuple[Path, TreeNode]]:
    """Pre-order walk yielding ``(path, node)``."""
    stack: List[Tuple[Path, TreeNode]] = [((), tree)]
    while stack:
        path, node = stack.pop()
        yield path, node
        if isinstance(node, Internal):
            stack.append((path + (1,), node.right))
            stack.append((path + (0,), node.left))


def leaf_paths(tree: TreeNode) -> List[Path]:
    """Leaf paths left to right; the position is the leaf's index."""
    return [path for path, node in iter_nodes(tree) if isinstance(node, Leaf)]


def internal_paths(tree: TreeNode) -> List[Path]:
    return [path for path, node in iter_nodes(tree) if isinstance(node, Internal)]


def prunable_paths(tree: TreeNode) -> List[Path]:
    """Internal nodes whose two children are both leaves."""
    return [
        path
        for path, node in iter_nodes(tree)
        if isinstance(node, Internal) and is_leaf(node.left) and is_leaf(node.right)
    ]


def swappable_pairs(tree: TreeNode) -> List[Tuple[Path, Path]]:
    """(parent, child) pairs where both nodes carry a splitting rule."""
    pairs: List[Tuple[Path, Path]] = []
    for path, node in iter_nodes(tree):
        if not isinstance(node, Internal):
            continue
        if isinstance(node.left, Internal):
            pairs.append((path, path + (0,)))
        if isinstance(node.right, Internal):
            pairs.append((path, path + (1,)))
    return pairs


def n_leaves(tree: TreeNode) -> int:
    return sum(1 for _, node in iter_nodes(tree) if isinstance(node, Leaf))


def tree_depth(tree: TreeNode) -> int:
    return max(len(path) for path, _ in iter_nodes(tree))


def get_node(tree: TreeNode, path: Path) -> TreeNode:
    node = tree
    for step in path:
        if not isinstance(node, Internal):
            raise DimensionError("path descends below a leaf", path=path)
        node = node.left if step == 0 else node.right
    return node


def replace_node(tree: TreeNode, path: Path, new: TreeNode) -> TreeNode:
    if not path:
        return new
    if not isinstance(tree, Internal):
        raise DimensionError("path descends below a leaf", path=path)
    head, rest = path[0], path[1:]
    if head == 0:
        return Internal(tree.rule, replace_node(tree.left, rest, new), tree.right)
    return Internal(tree.rule, tree.left, replace_node(tree.right, rest, new))


def with_leaf_values(tree: TreeNode, values: Sequence[float]) -> TreeNode:
    """Return *tree* with leaf values set left to right from *values*."""
    it = iter(values)

    def _rebuild(node: TreeNode) -> TreeNode:
        if isinstance(node, Leaf):
            return Leaf(float(next(it)))
        return Internal(node.rule, _rebuild(node.left), _rebuild(node.right))

    return _rebuild(tree)


def leaf_values(tree: TreeNode) -> np.ndarray:
    return np.array([node.mu for _, node in iter_nodes(tree) if isinstance(node, Leaf)], dtype=float)


def max_var_index(tree: TreeNode) -> int:
    return max((node.rule.var_index for _, node in iter_nodes(tree) if isinstance(node, Internal)), default=-1)


def tree_predict(x: Sequence[float], tree: TreeNode) -> float:
    row = np.asarray(x, dtype=float)
    node = tree
    while isinstance(node, Internal):
        var = node.rule.var_index
        if var < 0 or var >= row.shape[0]:
            raise DimensionError("tree references a missing covariate", var_index=var, k=row.shape[0])
        node = node.left if row[var] < node.rule.threshold else node.right
    return node.mu


def route(tree: TreeNode, x: np.ndarray) -> np.ndarray:
    """Leaf index (left-to-right order) of every row of *x*."""
    x = np.asarray(x, dtype=float)
    if max_var_index(tree) >= x.shape[1]:
        raise DimensionError("tree references a missing covariate", k=x.shape[1])
    out = np.empty(x.shape[0], dtype=np.intp)
    counter = 0

    def _walk(node: TreeNode, idx: np.ndarray) -> None:
        nonlocal counter
        if isinstance(node, Leaf):
            out[idx] = counter
            counter += 1
            return
        go_left = x[idx, node.rule.var_index] < node.rule.threshold
        _walk(node.left, idx[go_left])
        _walk(node.right, idx[~go_left])

    _walk(tree, np.arange(x.shape[0]))
    return out


def tree_fit(tree: TreeNode, x: np.ndarray) -> np.ndarray:
    return leaf_values(tree)[route(tree, x)]


def snap_thresholds(tree: TreeNode, columns: Sequence[np.ndarray]) -> TreeNode:
    """Move each threshold up to the smallest observed value at or above it.

    *columns* are the sorted observed values per covariate.  Routing of those
    observations is unchanged; a threshold above every value is left alone.
    """

    def _rebuild(node: TreeNode) -> TreeNode:
        if isinstance(node, Leaf):
            return node
        col = columns[node.rule.var_index]
        pos = int(np.searchsorted(col, node.rule.threshold, side="left"))
        rule = node.rule
        if pos < col.shape[0] and col[pos] != rule.threshold:
            rule = SplitRule(rule.var_index, float(col[pos]))
        return Internal(rule, _rebuild(node.left), _rebuild(node.right))

    return _rebuild(tree)


@dataclass(frozen=True)
class Forest:
    trees: Tuple[TreeNode, ...] = field(default_factory=tuple)

    @classmethod
    def stumps(cls, n_trees: int, mu: float = 0.0) -> "Forest":
        return cls(tuple(Leaf(mu) for _ in range(n_trees)))

    @property
    def S(self) -> int:
        return len(self.trees)

    def with_tree(self, index: int, tree: TreeNode) -> "Forest":
        trees = list(self.trees)
        trees[index] = tree
        return Forest(tuple(trees))

    def snapped(self, columns: Sequence[np.ndarray]) -> "Forest":
        return Forest(tuple(snap_thresholds(tree, columns) for tree in self.trees))

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[0], dtype=float)
        for tree in self.trees:
            total += tree_fit(tree, x)
        return total


def forest_predict(x: Sequence[float], forest: Forest) -> float:
    return float(sum(tree_predict(x, tree) for tree in forest.trees))


def render_tree(
    tree: TreeNode,
    names: Optional[Sequence[str]] = None,
    x: Optional[np.ndarray] = None,
    scale: float = 1.0,
    offset: float = 0.0,
) -> str:
    """Indented text dump; leaves show raw-scale values and counts when *x* is given."""
    counts = None
    if x is not None:
        counts = np.bincount(route(tree, x), minlength=n_leaves(tree))
    lines: List[str] = []
    leaf_counter = 0

    def _label(var: int) -> str:
        return names[var] if names is not None and var < len(names) else f"x{var}"

    def _walk(node: TreeNode, indent: int) -> None:
        nonlocal leaf_counter
        pad = "  " * indent
        if isinstance(node, Leaf):
            value = offset + scale * node.mu
            suffix = f" (n={int(counts[leaf_counter])})" if counts is not None else ""
            lines.append(f"{pad}leaf {value:.4g}{suffix}")
            leaf_counter += 1
            return
        lines.append(f"{pad}{_label(node.rule.var_index)} < {node.rule.threshold:.4g}")
        _walk(node.left, indent + 1)
        _walk(node.right, indent + 1)

    _walk(tree, 0)
    return "\n".join(lines)


def split_variable_counts(forests: Sequence[Forest], k: int) -> np.ndarray:
    """How often each covariate carries a splitting rule, summed over *forests*."""
    counts = np.zeros(k, dtype=np.int64)
    for forest in forests:
        for tree in forest.trees:
            for _, node in iter_nodes(tree):
                if isinstance(node, Internal) and node.rule.var_index < k:
                    counts[node.rule.var_index] += 1
    return counts
