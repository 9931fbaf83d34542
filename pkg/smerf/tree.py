"""Randomized SMERF tree: growth, routing, leaf distances and prediction."""

from __future__ import annotations
import logging
import threading
import weakref
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Iterator

import numpy as np
from scipy.optimize import brentq

from .core import RngStream, as_distance_matrix, as_feature_matrix
from .errors import DimensionMismatchError, ShapeMismatchError, UnknownLeafError
from .impurity import PairwiseCriterion, SplitCriterion, scan_with
from .types import (
    DistanceMatrix,
    FeatureMatrix,
    Hyperparams,
    SparseProjection,
    SplitParams,
)

_logger = logging.getLogger(__name__)


# ========== Tree structure ==========

@dataclass
class TreeNode:
    """
    One node of a SmerfTree.

    Split nodes carry ``split``, child ids and the realized gain; leaves carry
    ``leaf_id`` and their member rows (original indices, bootstrap copies
    repeated).
    """
    node_id: int
    depth: int
    n_samples: int
    split: SplitParams | None = None
    left: int | None = None
    right: int | None = None
    gain: float = 0.0
    leaf_id: int | None = None
    members: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(eq=False)
class SmerfTree:
    """
    Grown tree plus the bag it was grown on.

    Attributes:
        nodes: Nodes indexed by node id; node 0 is the root
        bag: Sorted training rows drawn for this tree (with multiplicity)
        p: Feature dimension the tree routes on
    """
    nodes: list[TreeNode]
    bag: np.ndarray
    p: int
    _leaves: list[TreeNode] = field(init=False, repr=False)
    _memo: weakref.WeakKeyDictionary = field(
        init=False, repr=False, default_factory=weakref.WeakKeyDictionary
    )
    _lock: threading.Lock = field(init=False, repr=False, default_factory=threading.Lock)

    def __post_init__(self) -> None:
        leaves = [node for node in self.nodes if node.is_leaf]
        self._leaves = sorted(leaves, key=lambda node: node.leaf_id)  # type: ignore[arg-type, return-value]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def num_leaves(self) -> int:
        return len(self._leaves)

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    @property
    def leaves(self) -> list[TreeNode]:
        return list(self._leaves)

    def splits(self) -> Iterator[TreeNode]:
        """Internal nodes in node-id order."""
        return (node for node in self.nodes if not node.is_leaf)

    def leaf_members(self, leaf_id: int) -> np.ndarray:
        """
        Raises:
            UnknownLeafError: If the tree has no such leaf
        """
        if not 0 <= int(leaf_id) < len(self._leaves):
            raise UnknownLeafError(f"Tree has {len(self._leaves)} leaves, got leaf id {leaf_id}")
        return self._leaves[int(leaf_id)].members  # type: ignore[return-value]

    def out_of_bag(self, n: int) -> np.ndarray:
        """Boolean mask of training rows never drawn into this tree's bag."""
        mask = np.ones(n, dtype=bool)
        mask[self.bag] = False
        return mask

    # ========== Routing ==========

    def _check_rows(self, X: Any) -> np.ndarray:
        values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.shape[1] != self.p:
            raise DimensionMismatchError(
                f"Tree was grown on p={self.p} features, got {values.shape[1]}"
            )
        return values

    def apply(self, X: Any) -> np.ndarray:
        """
        Route every row of X to its leaf.

        Args:
            X: Array of shape (m, p) or FeatureMatrix

        Returns:
            Leaf ids of shape (m,)

        Raises:
            DimensionMismatchError: If X does not have p columns
        """
        values = self._check_rows(X)
        out = np.empty(values.shape[0], dtype=np.intp)
        stack = [(0, np.arange(values.shape[0]))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node.leaf_id
                continue
            if rows.size == 0:
                continue
            go_left = node.split.goes_left(values[rows])  # type: ignore[union-attr]
            stack.append((node.right, rows[~go_left]))  # type: ignore[arg-type]
            stack.append((node.left, rows[go_left]))  # type: ignore[arg-type]
        return out

    # ========== Leaf distances ==========

    def _memo_for(self, Z: DistanceMatrix) -> dict[tuple[int, int], float]:
        with self._lock:
            memo = self._memo.get(Z)
            if memo is None:
                memo = {}
                self._memo[Z] = memo
            return memo

    def leaf_distance(self, Z: DistanceMatrix, a: int, b: int, memoize: bool = True) -> float:
        """Cross-average of z over two leaves' members, memoized per Z unless ``memoize`` is off."""
        key = (min(int(a), int(b)), max(int(a), int(b)))
        memo = self._memo_for(Z) if memoize else {}
        value = memo.get(key)
        if value is None:
            rows = self.leaf_members(key[0])
            cols = self.leaf_members(key[1])
            value = float(Z.block(rows, cols).sum()) / (rows.size * cols.size)
            memo[key] = value
        return value

    def memoized_pairs(self, Z: DistanceMatrix) -> int:
        """Number of leaf pairs cached for Z."""
        with self._lock:
            return len(self._memo.get(Z, ()))

    def leaf_weights(self, leaf_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Averaging weights of the given leaves over the union of their members.

        Returns:
            (W, union) where W[u, c] = copies of union[c] in leaf u / leaf size
        """
        members = [self.leaf_members(a) for a in leaf_ids]
        union = np.unique(np.concatenate(members))
        W = np.zeros((len(members), union.size), dtype=np.float64)
        for u, rows in enumerate(members):
            distinct, counts = np.unique(rows, return_counts=True)
            W[u, np.searchsorted(union, distinct)] = counts / rows.size
        return W, union

    def leaf_distance_table(self, Z: DistanceMatrix, leaf_ids: np.ndarray) -> np.ndarray:
        """
        Leaf-to-leaf distances for a set of leaves as one matrix product.

        Args:
            Z: Training distance matrix
            leaf_ids: Distinct leaf ids

        Returns:
            Symmetric (k, k) array
        """
        W, union = self.leaf_weights(np.asarray(leaf_ids, dtype=np.intp))
        H = W @ Z.block(union) @ W.T
        return 0.5 * (H + H.T)

    def leaf_means(self, values: np.ndarray) -> np.ndarray:
        """Mean of ``values`` over each leaf's members, bootstrap copies counted."""
        return np.array([float(np.mean(values[leaf.members])) for leaf in self._leaves])

    def __repr__(self) -> str:
        return (
            f"SmerfTree(nodes={len(self.nodes)}, leaves={self.num_leaves}, "
            f"depth={self.depth}, bag={self.bag.size})"
        )


# ========== Projection sampling ==========

@lru_cache(maxsize=256)
def nonzero_rate(p: int, nonzeros: float) -> float:
    """
    Per-feature inclusion rate q for sparse-binary projections.

    q solves p*q / (1 - (1-q)^p) = nonzeros, so a Binomial(p, q) count
    conditioned on being at least one averages ``nonzeros``.
    """
    if nonzeros <= 1.0 or p == 1:
        return 0.0
    if nonzeros >= p:
        return 1.0

    def excess(q: float) -> float:
        return p * q / -np.expm1(p * np.log1p(-q)) - nonzeros

    return float(brentq(excess, 1e-12, 1.0 - 1e-12, xtol=1e-15))


def _draw_nonzero_count(p: int, q: float, rng: RngStream) -> int:
    if q <= 0.0:
        return 1
    if q >= 1.0:
        return p
    while True:
        k = int(rng.binomial(p, q))
        if k >= 1:
            return k


def sample_projections(p: int, hp: Hyperparams, rng: RngStream) -> list[SparseProjection]:
    """
    Draw the candidate projections for one node.

    Axis mode samples min(d, p) distinct features without replacement.
    Binary mode draws, per projection, a nonzero count from Binomial(p, q)
    conditioned on at least one, that many distinct features, and a uniform
    sign for each.

    Args:
        p: Feature dimension
        hp: Hyperparameters (d, projection_mode, nonzeros)
        rng: Tree-local stream

    Returns:
        List of SparseProjection
    """
    d = hp.candidates(p)
    if hp.projection_mode == "axis":
        return [SparseProjection.axis(int(j)) for j in rng.choice(p, size=d, replace=False)]

    q = nonzero_rate(p, hp.nonzeros)
    projections = []
    for _ in range(d):
        k = _draw_nonzero_count(p, q, rng)
        features = np.sort(rng.choice(p, size=k, replace=False))
        weights = rng.choice(np.array([-1, 1]), size=k)
        projections.append(SparseProjection(
            features=tuple(int(f) for f in features),
            weights=tuple(int(w) for w in weights),
            mode="binary",
        ))
    return projections


def draw_bag(n: int, hp: Hyperparams, rng: RngStream) -> np.ndarray:
    """Training rows for one tree, sorted, with repeats under bootstrap."""
    if hp.sampling == "bootstrap":
        bag = rng.integers(0, n, size=n)
    else:
        bag = rng.choice(n, size=hp.bag_size(n), replace=False)
    return np.sort(bag).astype(np.intp)


# ========== Growth ==========

def grow_with_criterion(
    X: FeatureMatrix,
    criterion: SplitCriterion,
    hp: Hyperparams,
    rng: RngStream,
) -> SmerfTree:
    """
    Grow one tree greedily under any split criterion.

    The bag is drawn first, then nodes are expanded depth-first with the left
    child before the right, each expansion drawing its candidate projections
    from ``rng``. Two growers given equal streams therefore consume identical
    randomness and differ only where their criteria rank splits differently.

    A node becomes a leaf when it holds fewer than ``min_parent`` rows, sits
    at ``max_depth``, or no candidate beats the tie tolerance. Across
    projections a later candidate replaces the incumbent only by more than
    the tolerance.

    Args:
        X: Training features
        criterion: Split objective over the same rows as X
        hp: Hyperparameters
        rng: Tree-local stream

    Returns:
        SmerfTree
    """
    if criterion.n != X.n:
        raise ShapeMismatchError(f"Criterion covers {criterion.n} rows, X has {X.n}")

    bag = draw_bag(X.n, hp, rng)
    nodes = [TreeNode(node_id=0, depth=0, n_samples=int(bag.size))]
    stack: list[tuple[int, np.ndarray]] = [(0, bag)]
    leaf_count = 0

    while stack:
        node_id, idx = stack.pop()
        node = nodes[node_id]
        best_split = _find_split(X, criterion, hp, rng, idx, node.depth)

        if best_split is None:
            node.leaf_id = leaf_count
            node.members = idx
            leaf_count += 1
            continue

        split, gain = best_split
        go_left = split.goes_left(X.values[idx])
        left_idx, right_idx = idx[go_left], idx[~go_left]
        node.split, node.gain = split, gain
        node.left, node.right = len(nodes), len(nodes) + 1
        nodes.append(TreeNode(node_id=node.left, depth=node.depth + 1, n_samples=int(left_idx.size)))
        nodes.append(TreeNode(node_id=node.right, depth=node.depth + 1, n_samples=int(right_idx.size)))
        stack.append((node.right, right_idx))
        stack.append((node.left, left_idx))

    tree = SmerfTree(nodes=nodes, bag=bag, p=X.p)
    _logger.debug(f"Grew {criterion.name} tree: {tree}")
    return tree


def _find_split(
    X: FeatureMatrix,
    criterion: SplitCriterion,
    hp: Hyperparams,
    rng: RngStream,
    idx: np.ndarray,
    depth: int,
) -> tuple[SplitParams, float] | None:
    if idx.size < hp.min_parent:
        return None
    if hp.max_depth is not None and depth >= hp.max_depth:
        return None

    projections = sample_projections(X.p, hp, rng)
    tol = criterion.tolerance(idx)
    rows = X.values[idx]
    best = None
    best_projection = None
    for projection in projections:
        result = scan_with(criterion, idx, projection.apply(rows), tol)
        if result is None:
            continue
        if best is None or result.gain > best.gain + tol:
            best, best_projection = result, projection

    if best is None or best.gain <= tol:
        return None
    return SplitParams(projection=best_projection, threshold=best.threshold), best.gain  # type: ignore[arg-type]


def grow_tree(X: Any, Z: Any, hp: Hyperparams, rng: RngStream) -> SmerfTree:
    """
    Grow one SMERF tree maximizing the pairwise-distance split objective.

    Args:
        X: Training features (n x p)
        Z: Observed distances (n x n), rows in X order
        hp: Hyperparameters
        rng: Tree-local stream (see ``core.derive_stream``)

    Returns:
        SmerfTree

    Raises:
        ShapeMismatchError: If X and Z disagree on n

    Example:
        >>> tree = grow_tree(X, Z, Hyperparams(num_trees=1), derive_stream(0, 0))
        >>> tree.num_leaves
    """
    X = as_feature_matrix(X)
    Z = as_distance_matrix(Z)
    if X.n != Z.n:
        raise ShapeMismatchError(f"X has {X.n} rows but Z is {Z.n}x{Z.n}")
    return grow_with_criterion(X, PairwiseCriterion(Z), hp, rng)


# ========== Queries ==========

def leaf_of(tree: SmerfTree, x: Any) -> int:
    """
    Leaf reached by one feature vector.

    Raises:
        DimensionMismatchError: If x does not have p coordinates
    """
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1 or vector.size != tree.p:
        raise DimensionMismatchError(f"Expected a vector of {tree.p} coordinates, got shape {vector.shape}")
    return int(tree.apply(vector.reshape(1, -1))[0])


def tree_leaf_distance(tree: SmerfTree, Z: DistanceMatrix | Any, a: int, b: int) -> float:
    """
    Distance between two leaves: mean of z_ij over i in leaf a, j in leaf b.

    Results are memoized per DistanceMatrix. A raw array is validated on
    every call and never memoized, so repeated queries should pass the
    validated matrix (as the forest does with ``train_Z``).

    Raises:
        UnknownLeafError: If either leaf is not in the tree
    """
    if isinstance(Z, DistanceMatrix):
        return tree.leaf_distance(Z, a, b)
    return tree.leaf_distance(as_distance_matrix(Z), a, b, memoize=False)


def tree_predict(tree: SmerfTree, Z: DistanceMatrix | Any, x: Any, x_prime: Any) -> float:
    """Tree distance between two feature vectors via their leaves. See ``tree_leaf_distance`` for Z."""
    return tree_leaf_distance(tree, Z, leaf_of(tree, x), leaf_of(tree, x_prime))
