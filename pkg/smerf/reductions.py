"""
Label and response reductions to distance matrices, and reference CART trees.

The reference growers run the same scan, tie rules and random stream as the
SMERF grower, so on indicator or half-squared-difference distances the two
trees must coincide node for node.
"""

from __future__ import annotations
import logging
from typing import Any

import numpy as np

from .core import RngStream, as_feature_matrix
from .impurity import GiniCriterion, SplitCriterion, VarianceCriterion
from .tree import SmerfTree, TreeNode, grow_with_criterion
from .types import DistanceMatrix, Hyperparams, LabeledData, TreeEquivalence

_logger = logging.getLogger(__name__)

THRESHOLD_ATOL = 1e-12


def _as_labeled(data: LabeledData | Any, kind: str) -> LabeledData:
    if isinstance(data, LabeledData):
        return data
    return LabeledData(labels=data) if kind == "class" else LabeledData(responses=data)


# ========== Adapters ==========

def indicator_distance(labels: LabeledData | Any) -> DistanceMatrix:
    """z_ij = 1 if c_i != c_j else 0."""
    c = _as_labeled(labels, "class").values
    return DistanceMatrix((c[:, None] != c[None, :]).astype(np.float64))


def squared_half_distance(responses: LabeledData | Any) -> DistanceMatrix:
    """z_ij = (y_i - y_j)^2 / 2."""
    y = _as_labeled(responses, "reg").values
    diff = y[:, None] - y[None, :]
    return DistanceMatrix(0.5 * diff * diff)


def absolute_distance(responses: LabeledData | Any) -> DistanceMatrix:
    """z_ij = |y_i - y_j|, a heavier-tailed-robust regression reduction."""
    y = _as_labeled(responses, "reg").values
    return DistanceMatrix(np.abs(y[:, None] - y[None, :]))


# ========== Reference trees ==========

def reference_criterion(labeled: LabeledData) -> SplitCriterion:
    """Gini for labels, variance for responses."""
    if labeled.kind == "class":
        return GiniCriterion(labeled.values)
    return VarianceCriterion(labeled.values)


def grow_reference_tree(
    X: Any,
    labeled: LabeledData,
    hp: Hyperparams,
    rng: RngStream,
) -> SmerfTree:
    """
    Grow a classic CART tree (Gini or variance objective).

    Args:
        X: Training features
        labeled: Labels (Gini) or responses (variance)
        hp: Same hyperparameters as the SMERF tree being compared
        rng: Stream identical to the SMERF tree's

    Returns:
        SmerfTree-shaped reference tree

    Raises:
        ShapeMismatchError: If labeled and X disagree on n
    """
    X = as_feature_matrix(X)
    labeled.check_rows(X.n)
    return grow_with_criterion(X, reference_criterion(labeled), hp, rng)


def reference_predict(tree: SmerfTree, labeled: LabeledData, X: Any) -> np.ndarray:
    """
    Leaf predictions of a tree: mean response, or majority class with the
    smallest label winning ties.

    Returns:
        Array of shape (m,)
    """
    leaves = tree.apply(as_feature_matrix(X))
    if labeled.kind == "reg":
        return tree.leaf_means(labeled.values)[leaves]

    votes = np.empty(tree.num_leaves, dtype=np.int64)
    for leaf in tree.leaves:
        classes, counts = np.unique(labeled.values[leaf.members], return_counts=True)
        votes[leaf.leaf_id] = classes[int(np.argmax(counts))]
    return votes[leaves]


# ========== Structural comparison ==========

def _compare_nodes(t1: SmerfTree, n1: TreeNode, t2: SmerfTree, n2: TreeNode) -> str | None:
    if n1.is_leaf != n2.is_leaf:
        return "leaf in one tree, split in the other"
    if n1.is_leaf:
        if not np.array_equal(np.sort(n1.members), np.sort(n2.members)):  # type: ignore[arg-type]
            return "leaf index sets differ"
        return None

    s1, s2 = n1.split, n2.split
    if (s1.projection.features, s1.projection.weights) != (s2.projection.features, s2.projection.weights):  # type: ignore[union-attr]
        return f"projection {s1.projection} vs {s2.projection}"  # type: ignore[union-attr]
    if abs(s1.threshold - s2.threshold) > THRESHOLD_ATOL * max(1.0, abs(s1.threshold)):  # type: ignore[union-attr]
        return f"threshold {s1.threshold!r} vs {s2.threshold!r}"  # type: ignore[union-attr]
    return None


def assert_tree_equivalence(t1: SmerfTree, t2: SmerfTree) -> TreeEquivalence:
    """
    Compare two trees node by node in preorder.

    Trees are equivalent when they share topology, split projections,
    thresholds (to 1e-12) and leaf index sets.

    Returns:
        TreeEquivalence, with the path of the first divergence when not equal

    Example:
        >>> result = assert_tree_equivalence(smerf_tree, cart_tree)
        >>> if not result: print(result.path, result.reason)
    """
    stack = [(0, 0, "root")]
    while stack:
        id1, id2, path = stack.pop()
        n1, n2 = t1.nodes[id1], t2.nodes[id2]
        reason = _compare_nodes(t1, n1, t2, n2)
        if reason is not None:
            _logger.debug(f"Trees diverge at {path}: {reason}")
            return TreeEquivalence(equivalent=False, path=path, reason=reason)
        if not n1.is_leaf:
            stack.append((n1.right, n2.right, f"{path}/R"))  # type: ignore[arg-type]
            stack.append((n1.left, n2.left, f"{path}/L"))  # type: ignore[arg-type]
    return TreeEquivalence(equivalent=True)
