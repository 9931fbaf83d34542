"""
Unit tests for split-gain feature importance.
"""

import pytest
import logging

import numpy as np

from smerf.forest import SmerfForest, train_forest
from smerf.importance import feature_importance, tree_gains
from smerf.reductions import squared_half_distance
from smerf.types import Hyperparams

logger = logging.getLogger(__name__)


@pytest.mark.unit
class TestFeatureImportance:
    """Test importance sums and normalization."""

    def test_signal_feature_ranks_first(self, small_forest):
        """Test that the feature driving y dominates."""
        importance = feature_importance(small_forest, n_jobs=1)
        assert importance.ranking()[0] == 0
        assert importance.normalized[0] == 1.0
        assert np.all(importance.normalized <= 1.0)

    def test_raw_is_sum_of_split_gains(self, small_forest):
        """Test raw totals against a direct walk over splits."""
        expected = np.zeros(3)
        for tree in small_forest.trees:
            for node in tree.splits():
                expected[node.split.projection.features[0]] += node.gain
        assert np.allclose(feature_importance(small_forest).raw, expected, rtol=1e-12)

    def test_oblique_split_credits_every_feature(self, rng):
        """Test that each feature of a binary projection gets the full gain."""
        X = rng.uniform(size=(30, 6))
        Z = squared_half_distance(X[:, 0] - X[:, 1])
        hp = Hyperparams(num_trees=1, projection_mode="binary", nonzeros=3.0, d=4, max_depth=1)
        forest = train_forest(X, Z, hp, n_jobs=1)

        root = forest.trees[0].root
        pairs = tree_gains(forest.trees[0])
        assert len(pairs) == len(root.split.projection.features)
        raw = feature_importance(forest).raw
        for feature in root.split.projection.features:
            assert raw[feature] == root.gain

    def test_no_splits_gives_zeros(self, rng):
        """Test the all-zero vector when no tree splits."""
        X = rng.uniform(size=(10, 2))
        forest = train_forest(X, np.zeros((10, 10)), Hyperparams(num_trees=3), n_jobs=1)
        importance = feature_importance(forest)
        assert importance.raw.tolist() == [0.0, 0.0]
        assert importance.normalized.tolist() == [0.0, 0.0]

    def test_permuting_features_permutes_importance(self, rng):
        """Test equivariance under a column permutation."""
        logger.info("🧪 Testing importance under feature permutation")

        X = rng.uniform(size=(60, 4))
        Z = squared_half_distance(3.0 * X[:, 0] + X[:, 1])
        hp = Hyperparams(num_trees=20, d=4, max_depth=2, seed=6)
        perm = np.array([2, 0, 3, 1])

        base = feature_importance(train_forest(X, Z, hp, n_jobs=1)).raw
        permuted = feature_importance(train_forest(X[:, perm], Z, hp, n_jobs=1)).raw

        assert np.allclose(permuted, base[perm], rtol=1e-9, atol=1e-12)

        logger.info("✅ Importance follows the permutation")

    def test_independent_of_worker_count(self, small_regression):
        """Test identical importance for 1 and 4 workers."""
        X, _, Z = small_regression
        forest = train_forest(X, Z, Hyperparams(num_trees=8, seed=2), n_jobs=1)
        assert np.array_equal(feature_importance(forest, n_jobs=1).raw, feature_importance(forest, n_jobs=4).raw)

    def test_independent_of_tree_order(self, small_forest):
        """Test that reversing the trees leaves the importance unchanged."""
        flipped = SmerfForest(
            trees=small_forest.trees[::-1], hp=small_forest.hp, train_Z=small_forest.train_Z,
            n=small_forest.n, p=small_forest.p,
        )
        forward = feature_importance(small_forest, n_jobs=1)
        backward = feature_importance(flipped, n_jobs=1)
        assert np.allclose(backward.raw, forward.raw, rtol=1e-12, atol=0.0)
        assert backward.ranking().tolist() == forward.ranking().tolist()
