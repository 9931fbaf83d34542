"""
Pytest configuration and fixtures.

This module provides small synthetic data sets, brute-force oracles and
helpers shared by the smerf test suite.
"""

import json
import pytest
import logging
import struct
from pathlib import Path
from typing import Callable

import numpy as np

from smerf import Hyperparams, train_forest
from smerf.reductions import indicator_distance, squared_half_distance
from smerf.types import DistanceMatrix, FeatureMatrix

# Configure logging for tests
logging.basicConfig(
    level=logging.DEBUG,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)


# ============================================================
# DATA FIXTURES
# ============================================================

@pytest.fixture
def rng() -> np.random.Generator:
    """Test-local generator with a fixed seed."""
    return np.random.default_rng(20240607)


@pytest.fixture
def random_symmetric() -> Callable[..., np.ndarray]:
    """
    Factory for random symmetric matrices.

    Example:
        def test_x(random_symmetric):
            Z = random_symmetric(8, seed=1, zero_diagonal=True)
    """
    def _make(n: int, seed: int = 0, zero_diagonal: bool = False, low: float = 0.0) -> np.ndarray:
        gen = np.random.default_rng(seed)
        A = gen.uniform(low, 1.0, size=(n, n))
        Z = np.triu(A) + np.triu(A, 1).T
        if zero_diagonal:
            np.fill_diagonal(Z, 0.0)
        return Z

    return _make


@pytest.fixture
def small_regression(rng):
    """
    40 points in 3 dimensions with z_ij = (y_i - y_j)^2 / 2 driven by feature 0.

    Returns:
        (X, y, Z) tuple
    """
    logger.debug("📝 Creating small regression data")
    X = rng.uniform(size=(40, 3))
    y = 2.0 * X[:, 0] + 0.1 * rng.standard_normal(40)
    return X, y, squared_half_distance(y)


@pytest.fixture
def small_classes(rng):
    """
    60 points in 4 dimensions with 3 classes and indicator distances.

    Returns:
        (X, labels, Z) tuple
    """
    logger.debug("📝 Creating small classification data")
    X = rng.uniform(size=(60, 4))
    labels = (X[:, 1] > 0.5).astype(int) + (X[:, 2] > 0.7).astype(int)
    return X, labels, indicator_distance(labels)


@pytest.fixture
def small_forest(small_regression):
    """Ten bootstrap trees on ``small_regression``."""
    X, _, Z = small_regression
    return train_forest(X, Z, Hyperparams(num_trees=10, seed=3), n_jobs=1)


# ============================================================
# BRUTE-FORCE ORACLES
# ============================================================

@pytest.fixture
def naive_avg_distance() -> Callable[[np.ndarray, list], float]:
    """Nested-loop average pairwise distance over a node sample."""
    def _avg(Z: np.ndarray, S) -> float:
        total = 0.0
        for i in S:
            for j in S:
                total += Z[i, j]
        return total / len(S) ** 2

    return _avg


@pytest.fixture
def naive_split_gain(naive_avg_distance) -> Callable[..., float]:
    """Split objective recomputed from scratch."""
    def _gain(Z: np.ndarray, S, left, right) -> float:
        return (
            len(S) * naive_avg_distance(Z, S)
            - len(left) * naive_avg_distance(Z, left)
            - len(right) * naive_avg_distance(Z, right)
        )

    return _gain


@pytest.fixture
def naive_best_split(naive_split_gain) -> Callable[..., tuple]:
    """
    Exhaustive scan recomputing the objective at every midpoint.

    Returns:
        Function giving (threshold, gain) or None; ties go to the smaller
        threshold.
    """
    def _scan(Z: np.ndarray, S, values) -> tuple | None:
        S = list(S)
        values = np.asarray(values, dtype=float)
        distinct = np.unique(values)
        best = None
        for a, b in zip(distinct[:-1], distinct[1:]):
            threshold = a / 2.0 + b / 2.0
            left = [s for s, v in zip(S, values) if v <= threshold]
            right = [s for s, v in zip(S, values) if v > threshold]
            gain = naive_split_gain(Z, S, left, right)
            if best is None or gain > best[1] + 1e-9 * max(1.0, abs(best[1])):
                best = (threshold, gain)
        return best

    return _scan


@pytest.fixture
def naive_cross_average() -> Callable[..., float]:
    """Nested-loop leaf-to-leaf distance."""
    def _cross(Z: np.ndarray, rows, cols) -> float:
        total = 0.0
        for i in rows:
            for j in cols:
                total += Z[i, j]
        return total / (len(rows) * len(cols))

    return _cross


@pytest.fixture
def naive_average_precision() -> Callable[..., float]:
    """AP of one point by direct enumeration of the ranked list."""
    def _ap(pred_row, truth_row, others) -> float:
        ranked = sorted(zip(pred_row, others))
        relevant = {idx for _, idx in sorted(zip(truth_row, others))[:10]}
        hits, total = 0, 0.0
        for k, (_, idx) in enumerate(ranked, start=1):
            if idx in relevant:
                hits += 1
                total += hits / k
        return total / 10

    return _ap


@pytest.fixture
def naive_auc_roc() -> Callable[..., float]:
    """ROC area by trapezoids between the (FPR, TPR) points of every distinct threshold."""
    def _roc(scores, labels) -> float:
        scores, labels = np.asarray(scores, dtype=float), np.asarray(labels, dtype=int)
        positives, negatives = labels.sum(), (1 - labels).sum()
        points = [(0.0, 0.0)]
        for threshold in sorted(set(scores.tolist()), reverse=True):
            called = scores >= threshold
            false_positive = float((called & (labels == 0)).sum()) / negatives
            true_positive = float((called & (labels == 1)).sum()) / positives
            points.append((false_positive, true_positive))
        area = 0.0
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            area += (x1 - x0) * (y0 + y1) / 2
        return area

    return _roc


@pytest.fixture
def naive_auc_pr() -> Callable[..., float]:
    """Step-wise PR area: precision times the recall gained at each distinct threshold."""
    def _pr(scores, labels) -> float:
        scores, labels = np.asarray(scores, dtype=float), np.asarray(labels, dtype=int)
        positives = labels.sum()
        area, previous_recall = 0.0, 0.0
        for threshold in sorted(set(scores.tolist()), reverse=True):
            called = scores >= threshold
            hits = int((called & (labels == 1)).sum())
            recall = hits / positives
            area += (recall - previous_recall) * hits / called.sum()
            previous_recall = recall
        return area

    return _pr


# ============================================================
# PYTEST MARKERS
# ============================================================

def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line(
        "markers", "unit: Unit tests (fast, small synthetic inputs)"
    )
    config.addinivalue_line(
        "markers", "slow: Slow tests (seconds to minutes)"
    )
    config.addinivalue_line(
        "markers", "acceptance: Experiment-scale checks (minutes)"
    )
    config.addinivalue_line(
        "markers", "cli: Command-line runs through smerf.cli.main"
    )


# ============================================================
# CAPLOG FIXTURE CONFIGURATION
# ============================================================

@pytest.fixture(autouse=True)
def configure_caplog(caplog):
    """
    Configure caplog to capture all log levels.

    This runs automatically for all tests.
    """
    caplog.set_level(logging.DEBUG)
    return caplog


# ============================================================
# TEST UTILITIES
# ============================================================

@pytest.fixture
def assert_symmetric():
    """
    Helper asserting a matrix is exactly symmetric with finite entries.

    Returns:
        Function that validates a square array
    """
    def _assert(values) -> None:
        values = values.values if isinstance(values, (DistanceMatrix, FeatureMatrix)) else np.asarray(values)
        logger.debug(f"✅ Asserting symmetry of {values.shape} matrix")
        assert values.ndim == 2 and values.shape[0] == values.shape[1]
        assert np.all(np.isfinite(values))
        assert np.array_equal(values, values.T)

    return _assert


@pytest.fixture
def patch_model_array() -> Callable[..., Path]:
    """
    Helper rewriting one element of a named array inside a saved model file.

    Returns:
        Function (source, target, name, index, value) -> target path
    """
    def _patch(source: Path, target: Path, name: str, index: int, value) -> Path:
        blob = bytearray(Path(source).read_bytes())
        prefix = struct.Struct("<8sIQ")
        _, _, header_len = prefix.unpack_from(blob, 0)
        header = json.loads(bytes(blob[prefix.size:prefix.size + header_len]))
        offset = prefix.size + header_len
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            if spec["name"] == name:
                position = offset + index * dtype.itemsize
                blob[position:position + dtype.itemsize] = np.array([value], dtype=dtype).tobytes()
                break
            offset += count * dtype.itemsize
        else:
            raise KeyError(name)
        logger.debug(f"Patched {name}[{index}] = {value} in {target}")
        Path(target).write_bytes(bytes(blob))
        return Path(target)

    return _patch
