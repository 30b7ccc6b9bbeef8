import numpy as np
import pytest

from app.bart.tree import (
    Forest,
    Internal,
    Leaf,
    SplitRule,
    get_node,
    leaf_paths,
    leaf_values,
    n_leaves,
    prunable_paths,
    render_tree,
    replace_node,
    route,
    snap_thresholds,
    split_variable_counts,
    swappable_pairs,
    tree_depth,
    tree_predict,
    with_leaf_values,
)
from app.core.errors import DimensionError


def _two_level() -> Internal:
    # x0 < 0.5 -> (x1 < 1.0 -> -1 | 0) | 2
    return Internal(
        SplitRule(0, 0.5),
        Internal(SplitRule(1, 1.0), Leaf(-1.0), Leaf(0.0)),
        Leaf(2.0),
    )


def test_routing_sends_ties_right():
    tree = Internal(SplitRule(0, 0.5), Leaf(-1.0), Leaf(1.0))
    assert tree_predict([0.4], tree) == -1.0
    assert tree_predict([0.5], tree) == 1.0
    assert tree_predict([0.6], tree) == 1.0


def test_route_matches_tree_predict():
    tree = _two_level()
    x = np.array([[0.0, 0.0], [0.0, 2.0], [1.0, 0.0], [0.5, 0.9]])
    assert route(tree, x).tolist() == [0, 1, 2, 2]
    fitted = leaf_values(tree)[route(tree, x)]
    assert fitted.tolist() == [tree_predict(row, tree) for row in x]


def test_structure_queries():
    tree = _two_level()
    assert n_leaves(tree) == 3
    assert tree_depth(tree) == 2
    assert leaf_paths(tree) == [(0, 0), (0, 1), (1,)]
    assert prunable_paths(tree) == [(0,)]
    assert swappable_pairs(tree) == [((), (0,))]


def test_replace_node_leaves_original_untouched():
    tree = _two_level()
    pruned = replace_node(tree, (0,), Leaf(5.0))
    assert n_leaves(pruned) == 2
    assert n_leaves(tree) == 3
    assert pruned.right is tree.right


def test_get_node_below_leaf_raises():
    with pytest.raises(DimensionError):
        get_node(Leaf(0.0), (0,))


def test_with_leaf_values_sets_left_to_right():
    tree = with_leaf_values(_two_level(), [1.0, 2.0, 3.0])
    assert leaf_values(tree).tolist() == [1.0, 2.0, 3.0]


def test_missing_covariate_raises():
    tree = Internal(SplitRule(3, 0.0), Leaf(), Leaf())
    with pytest.raises(DimensionError):
        tree_predict([1.0, 2.0], tree)
    with pytest.raises(DimensionError):
        route(tree, np.zeros((2, 2)))


def test_forest_predict_sums_trees():
    forest = Forest((Leaf(1.0), Internal(SplitRule(0, 0.0), Leaf(-1.0), Leaf(1.0))))
    x = np.array([[-1.0], [1.0]])
    assert forest.predict(x).tolist() == [0.0, 2.0]
    assert Forest.stumps(4).S == 4


def test_render_tree_uses_names_and_counts():
    x = np.array([[0.0, 0.0], [0.0, 2.0], [1.0, 0.0]])
    text = render_tree(_two_level(), names=["IP_l1", "ESI_l1"], x=x, scale=2.0, offset=1.0)
    assert "IP_l1 < 0.5" in text
    assert "ESI_l1 < 1" in text
    # leaf mu 2.0 on the raw scale is 1 + 2 * 2
    assert "leaf 5 (n=1)" in text


def test_split_variable_counts():
    forests = [Forest((_two_level(), Leaf())), Forest((Internal(SplitRule(0, 0.0), Leaf(), Leaf()),))]
    assert split_variable_counts(forests, 3).tolist() == [2, 1, 0]


def test_snap_moves_threshold_onto_observed_value():
    tree = Internal(SplitRule(0, 0.37), Leaf(-1.0), Internal(SplitRule(1, 5.0), Leaf(0.0), Leaf(1.0)))
    x = np.array([[0.0, 1.0], [0.5, 2.0], [1.0, 3.0], [0.5, 9.0]])
    columns = [np.unique(x[:, k]) for k in range(2)]
    snapped = snap_thresholds(tree, columns)
    assert snapped.rule.threshold == 0.5
    assert snapped.right.rule.threshold == 9.0
    assert np.array_equal(route(snapped, x), route(tree, x))


def test_snap_keeps_threshold_above_every_value():
    tree = Internal(SplitRule(0, 4.0), Leaf(0.0), Leaf(1.0))
    snapped = Forest((tree,)).snapped([np.array([1.0, 2.0])])
    assert snapped.trees[0].rule.threshold == 4.0
