from __future__ import annotations

import json
import logging
from typing import List, Optional

from pydantic import BaseModel, Field

from app.bart.tree import Forest, Internal, Leaf, SplitRule, TreeNode
from app.core.errors import SchemaError
from app.core.run_config import FORMAT_VERSION

logger = logging.getLogger(__name__)


class NodeModel(BaseModel):
    """Leaf when ``var`` is None, otherwise a split ``x[var] < thr``."""

    var: Optional[int] = None
    thr: Optional[float] = None
    mu: Optional[float] = None
    left: Optional["NodeModel"] = None
    right: Optional["NodeModel"] = None


class ForestModel(BaseModel):
    format_version: int = FORMAT_VERSION
    trees: List[NodeModel] = Field(default_factory=list)


NodeModel.model_rebuild()


def node_to_model(node: TreeNode) -> NodeModel:
    if isinstance(node, Leaf):
        return NodeModel(mu=node.mu)
    return NodeModel(
        var=node.rule.var_index,
        thr=node.rule.threshold,
        left=node_to_model(node.left),
        right=node_to_model(node.right),
    )


def model_to_node(model: NodeModel) -> TreeNode:
    if model.var is None:
        if model.mu is None:
            raise SchemaError("leaf node without a value")
        return Leaf(float(model.mu))
    if model.thr is None or model.left is None or model.right is None:
        raise SchemaError("split node needs thr, left and right", var=model.var)
    return Internal(SplitRule(int(model.var), float(model.thr)), model_to_node(model.left), model_to_node(model.right))


def forest_to_model(forest: Forest) -> ForestModel:
    return ForestModel(trees=[node_to_model(tree) for tree in forest.trees])


def forest_from_model(model: ForestModel) -> Forest:
    if model.format_version > FORMAT_VERSION:
        raise SchemaError("forest written by a newer format", format_version=model.format_version)
    return Forest(tuple(model_to_node(tree) for tree in model.trees))


def dump_forest(forest: Forest) -> str:
    return json.dumps(forest_to_model(forest).model_dump(mode="json", exclude_none=True), sort_keys=True)


def load_forest(text: str) -> Forest:
    return forest_from_model(ForestModel(**json.loads(text)))
