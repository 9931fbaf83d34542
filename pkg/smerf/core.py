"""Validation and deterministic randomness shared by every other module."""

from __future__ import annotations
import logging
from typing import Any

import numpy as np

from .errors import (
    AsymmetryExceedsToleranceError,
    NonFiniteEntryError,
    NonSquareError,
    ValidationError,
)
from .types import DistanceMatrix, FeatureMatrix

_logger = logging.getLogger(__name__)

# Relative to max |z|; tolerates a round trip through text formats.
DEFAULT_SYMMETRY_RTOL = 1e-9

RngStream = np.random.Generator


def validate_distance_matrix(values: Any, tolerance: float | None = None) -> DistanceMatrix:
    """
    Validate and symmetrize an observed distance matrix.

    Entry pairs whose asymmetry is within tolerance are replaced by their
    mean, which leaves the result exactly symmetric. The diagonal is kept as
    given and negative distances are accepted.

    Args:
        values: Square array-like of distances
        tolerance: Absolute tolerance on |z_ij - z_ji|; defaults to
            1e-9 * max|z|

    Returns:
        Exactly symmetric DistanceMatrix

    Raises:
        NonSquareError: If the matrix is not square
        NonFiniteEntryError: On NaN or infinite entries
        AsymmetryExceedsToleranceError: If some pair differs by more than tolerance
    """
    Z = np.array(values, dtype=np.float64, copy=True)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise NonSquareError(f"Distance matrix must be square, got shape {Z.shape}")

    finite = np.isfinite(Z)
    if not finite.all():
        i, j = np.argwhere(~finite)[0]
        raise NonFiniteEntryError(int(i), int(j))

    if tolerance is None:
        scale = float(np.abs(Z).max()) if Z.size else 0.0
        tolerance = DEFAULT_SYMMETRY_RTOL * scale
    if tolerance < 0:
        raise ValidationError(f"Tolerance must be non-negative, got {tolerance}")

    gap = np.abs(Z - Z.T)
    too_far = np.argwhere(np.triu(gap > tolerance, k=1))
    if too_far.size:
        i, j = (int(k) for k in too_far[0])
        raise AsymmetryExceedsToleranceError(i, j, float(gap[i, j]), float(tolerance))

    changed = int(np.count_nonzero(np.triu(gap > 0, k=1)))
    if changed:
        _logger.warning(f"Averaged {changed} slightly asymmetric distance pair(s)")
        Z = (Z + Z.T) / 2.0

    return DistanceMatrix(Z)


def as_feature_matrix(X: FeatureMatrix | Any) -> FeatureMatrix:
    """Coerce an array-like to FeatureMatrix."""
    return X if isinstance(X, FeatureMatrix) else FeatureMatrix(np.asarray(X, dtype=np.float64))


def as_distance_matrix(Z: DistanceMatrix | Any) -> DistanceMatrix:
    """Coerce an array-like to DistanceMatrix using the default tolerance."""
    return Z if isinstance(Z, DistanceMatrix) else validate_distance_matrix(Z)


def derive_stream(master_seed: int, tree_index: int) -> RngStream:
    """
    Random stream for one tree.

    The stream is a pure function of (master_seed, tree_index): a Philox
    counter-based generator keyed by a SeedSequence spawn key, so streams do
    not collide across tree indices and do not depend on which worker
    thread grows the tree.

    Args:
        master_seed: Forest seed (0 <= seed < 2**64)
        tree_index: Tree position b >= 0

    Returns:
        numpy Generator for tree b
    """
    if tree_index < 0:
        raise ValidationError(f"tree_index must be >= 0, got {tree_index}")
    return substream(master_seed, tree_index)


def substream(seed: int, *key: int) -> RngStream:
    """Independent Philox stream for any (seed, key...) path."""
    if seed < 0:
        raise ValidationError(f"Seed must be >= 0, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))
