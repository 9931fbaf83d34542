"""Impurity functionals and the exhaustive split-gain scan."""

from __future__ import annotations
import logging
from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from .errors import IndexOutOfRangeError, NotAPartitionError, ShapeMismatchError
from .types import DistanceMatrix, LabeledData, NodeSample, SplitScanResult

_logger = logging.getLogger(__name__)

# Gains closer than GAIN_RTOL * node scale are ties; a split must beat it.
GAIN_RTOL = 1e-9


def _node_indices(S: NodeSample | Any, n: int) -> np.ndarray:
    sample = NodeSample.of(S)
    sample.check_bounds(n)
    return sample.indices


def _pair_sum(Z: DistanceMatrix, idx: np.ndarray) -> float:
    return float(Z.block(idx).sum())


# ========== Impurity functionals ==========

def avg_pairwise_distance(Z: DistanceMatrix, S: NodeSample | Any) -> float:
    """
    Average pairwise distance I_D(S) over all ordered pairs, diagonal included.

    Args:
        Z: Distance matrix
        S: Node sample (repeated indices count as copies)

    Returns:
        (1 / n_s^2) * sum_{i, j in S} z_ij

    Raises:
        IndexOutOfRangeError: If S references rows outside Z
    """
    idx = _node_indices(S, Z.n)
    return _pair_sum(Z, idx) / float(idx.size) ** 2


def gini_impurity(labels: LabeledData | Any, S: NodeSample | Any) -> float:
    """
    Gini impurity 1 - sum_k f_k^2 of the labels in S.

    Computed from integer class counts as (n_s^2 - sum_k c_k^2) / n_s^2.

    Raises:
        IndexOutOfRangeError: If S references rows without a label
    """
    values = labels.values if isinstance(labels, LabeledData) else np.asarray(labels)
    idx = _node_indices(S, values.shape[0])
    _, counts = np.unique(values[idx], return_counts=True)
    n_s = int(idx.size)
    return float(n_s * n_s - int((counts.astype(np.int64) ** 2).sum())) / float(n_s * n_s)


def sample_variance(y: LabeledData | Any, S: NodeSample | Any) -> float:
    """
    Biased (divide-by-n_s) sample variance of the responses in S.

    Raises:
        IndexOutOfRangeError: If S references rows without a response
    """
    values = y.values if isinstance(y, LabeledData) else np.asarray(y, dtype=np.float64)
    idx = _node_indices(S, values.shape[0])
    picked = values[idx].astype(np.float64)
    centered = picked - picked.mean()
    return float(np.mean(centered * centered))


def split_gain(
    Z: DistanceMatrix,
    S: NodeSample | Any,
    S_L: NodeSample | Any,
    S_R: NodeSample | Any,
) -> float:
    """
    Split objective n_s*I_D(S) - n_L*I_D(S_L) - n_R*I_D(S_R).

    Raises:
        NotAPartitionError: If S_L and S_R are empty or do not partition S
    """
    try:
        idx = _node_indices(S, Z.n)
        left = _node_indices(S_L, Z.n)
        right = _node_indices(S_R, Z.n)
    except IndexOutOfRangeError:
        raise
    except Exception as e:
        raise NotAPartitionError(f"Children must be non-empty index lists: {e}")

    if not np.array_equal(np.sort(idx), np.sort(np.concatenate([left, right]))):
        raise NotAPartitionError("S_L and S_R do not partition S")

    return (
        _pair_sum(Z, idx) / idx.size
        - _pair_sum(Z, left) / left.size
        - _pair_sum(Z, right) / right.size
    )


# ========== Split criteria ==========

class SplitCriterion(ABC):
    """
    Objective evaluated by the exhaustive scan.

    ``prefix_gains`` receives node rows already sorted by projected value and
    returns, for every k = 1..m-1, the gain of sending the first k rows left.
    """

    name: str = "criterion"

    @property
    @abstractmethod
    def n(self) -> int:
        """Number of rows the criterion covers."""

    @abstractmethod
    def scale(self, idx: np.ndarray) -> float:
        """Magnitude of the node objective, used to scale tie tolerance."""

    @abstractmethod
    def prefix_gains(self, idx_sorted: np.ndarray) -> np.ndarray:
        """Gains for every left-prefix size 1..m-1."""

    def tolerance(self, idx: np.ndarray) -> float:
        return GAIN_RTOL * self.scale(idx)


class PairwiseCriterion(SplitCriterion):
    """Average pairwise distance reduction on an observed Z."""

    name = "pairwise"

    def __init__(self, Z: DistanceMatrix):
        self.Z = Z

    @property
    def n(self) -> int:
        return self.Z.n

    def scale(self, idx: np.ndarray) -> float:
        return float(np.abs(self.Z.block(idx)).sum()) / idx.size

    def prefix_gains(self, idx_sorted: np.ndarray) -> np.ndarray:
        # Moving row k from right to left adds its pairs with rows < k to the
        # left sum and removes its pairs with rows > k from the right sum;
        # row sums of the lower/upper triangles give every update at once.
        block = self.Z.block(idx_sorted)
        m = block.shape[0]
        diag = np.diagonal(block)
        lower = np.tril(block, -1).sum(axis=1)
        upper = block.sum(axis=1) - lower - diag
        left_sum = np.cumsum(2.0 * lower + diag)
        right_sum = np.cumsum((2.0 * upper + diag)[::-1])[::-1]
        total = float(block.sum())
        k = np.arange(1, m, dtype=np.float64)
        return total / m - left_sum[:-1] / k - right_sum[1:] / (m - k)


class GiniCriterion(SplitCriterion):
    """CART classification objective n_s*I_G(S) - n_L*I_G(S_L) - n_R*I_G(S_R)."""

    name = "gini"

    def __init__(self, labels: np.ndarray):
        _, codes = np.unique(np.asarray(labels), return_inverse=True)
        self.codes = codes.astype(np.intp)
        self.num_classes = int(codes.max()) + 1 if codes.size else 0

    @property
    def n(self) -> int:
        return int(self.codes.size)

    @staticmethod
    def _mass(counts: np.ndarray, size: np.ndarray | float) -> np.ndarray:
        return size - (counts * counts).sum(axis=-1) / size

    def scale(self, idx: np.ndarray) -> float:
        counts = np.bincount(self.codes[idx], minlength=self.num_classes).astype(np.float64)
        return float(self._mass(counts, float(idx.size)))

    def prefix_gains(self, idx_sorted: np.ndarray) -> np.ndarray:
        m = idx_sorted.size
        onehot = np.zeros((m, self.num_classes), dtype=np.float64)
        onehot[np.arange(m), self.codes[idx_sorted]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        total = onehot.sum(axis=0)
        k = np.arange(1, m, dtype=np.float64)
        return (
            self._mass(total, float(m))
            - self._mass(left, k)
            - self._mass(total - left, m - k)
        )


class VarianceCriterion(SplitCriterion):
    """CART regression objective n_s*I_V(S) - n_L*I_V(S_L) - n_R*I_V(S_R)."""

    name = "variance"

    def __init__(self, responses: np.ndarray):
        self.y = np.asarray(responses, dtype=np.float64)

    @property
    def n(self) -> int:
        return int(self.y.size)

    def scale(self, idx: np.ndarray) -> float:
        picked = self.y[idx]
        centered = picked - picked.mean()
        return float((centered * centered).sum())

    def prefix_gains(self, idx_sorted: np.ndarray) -> np.ndarray:
        picked = self.y[idx_sorted]
        c = picked - picked.mean()
        m = c.size
        s1 = np.cumsum(c)
        s2 = np.cumsum(c * c)
        t1, t2 = s1[-1], s2[-1]
        s1, s2 = s1[:-1], s2[:-1]
        k = np.arange(1, m, dtype=np.float64)
        mass_left = s2 - s1 * s1 / k
        mass_right = (t2 - s2) - (t1 - s1) ** 2 / (m - k)
        return (t2 - t1 * t1 / m) - mass_left - mass_right


# ========== Exhaustive scan ==========

def threshold_between(lower: float, upper: float) -> float:
    """Midpoint of two consecutive distinct values, kept in [lower, upper)."""
    mid = lower / 2.0 + upper / 2.0
    if not lower <= mid < upper:
        mid = lower
    return mid


def scan_with(
    criterion: SplitCriterion,
    S: NodeSample | Any,
    projected_values: Any,
    tol: float = 0.0,
) -> SplitScanResult | None:
    """
    Exhaustive one-dimensional threshold scan for any criterion.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Among gains within ``tol`` of the maximum the smallest threshold
    wins.

    Args:
        criterion: Split objective
        S: Node rows
        projected_values: One projected value per entry of S
        tol: Absolute tie tolerance on gains

    Returns:
        Best split, or None when every projected value is identical
    """
    idx = _node_indices(S, criterion.n)
    values = np.asarray(projected_values, dtype=np.float64)
    if values.shape != idx.shape:
        raise ShapeMismatchError(
            f"{values.size} projected values for a node of {idx.size} rows"
        )

    order = np.argsort(values, kind="stable")
    ordered = values[order]
    positions = np.flatnonzero(ordered[1:] > ordered[:-1]) + 1
    if positions.size == 0:
        return None

    gains = criterion.prefix_gains(idx[order])[positions - 1]
    best = float(gains.max())
    pick = int(np.flatnonzero(gains >= best - tol)[0])
    k = int(positions[pick])
    m = int(idx.size)

    return SplitScanResult(
        threshold=threshold_between(float(ordered[k - 1]), float(ordered[k])),
        gain=float(gains[pick]),
        left_count=k,
        right_count=m - k,
    )


def best_split_scan(
    Z: DistanceMatrix,
    S: NodeSample | Any,
    projected_values: Any,
    tol: float = 0.0,
) -> SplitScanResult | None:
    """
    Best threshold for one candidate projection under the pairwise objective.

    Each point moved from the right child to the left updates both pairwise
    sums in O(n_s), so the scan costs O(n_s^2) per projection and matches a
    full recomputation of the objective at every midpoint.

    Args:
        Z: Distance matrix
        S: Node rows
        projected_values: Projected values aligned with S
        tol: Absolute tie tolerance on gains

    Returns:
        SplitScanResult, or None when no threshold separates the points
    """
    return scan_with(PairwiseCriterion(Z), S, projected_values, tol)
