"""Split-gain feature importance."""

from __future__ import annotations
import logging
import math

import numpy as np

from ._helpers import parallel_map
from .forest import SmerfForest
from .tree import SmerfTree
from .types import ImportanceVector

_logger = logging.getLogger(__name__)


def tree_gains(tree: SmerfTree) -> list[tuple[int, float]]:
    """(feature, gain) for every feature of every split in one tree."""
    return [
        (feature, node.gain)
        for node in tree.splits()
        for feature in node.split.projection.features  # type: ignore[union-attr]
    ]


def feature_importance(forest: SmerfForest, n_jobs: int | None = None) -> ImportanceVector:
    """
    Sum of realized split gains per feature, over every split in the forest.

    Each feature in an oblique projection receives the full gain of its
    split. Per-feature totals use exactly rounded summation, so the result
    does not depend on tree order.

    Args:
        forest: Trained SmerfForest
        n_jobs: Worker threads

    Returns:
        ImportanceVector with raw sums and max-normalized values
    """
    contributions: list[list[float]] = [[] for _ in range(forest.p)]
    for pairs in parallel_map(tree_gains, forest.trees, n_jobs):
        for feature, gain in pairs:
            contributions[feature].append(gain)

    raw = np.array([math.fsum(gains) for gains in contributions], dtype=np.float64)
    importance = ImportanceVector.from_raw(raw)
    _logger.debug(f"Top features: {importance.ranking()[:5].tolist()}")
    return importance
