"""
Experiment-scale checks.

These run for minutes; select them with ``pytest -m acceptance`` or
``python run_tests.py acceptance``.
"""

import pytest
import logging

import numpy as np

from smerf.core import derive_stream
from smerf.experiments import linkpred_replicate, run_simbench, run_theory_check, summarize
from smerf.forest import train_forest, variance_decomposition
from smerf.importance import feature_importance
from smerf.model_file import save_forest
from smerf.reductions import (
    assert_tree_equivalence,
    grow_reference_tree,
    indicator_distance,
    reference_predict,
    squared_half_distance,
)
from smerf.simdata import gen_additive_theory, gen_sbm_network, generate
from smerf.tree import grow_tree
from smerf.types import Hyperparams, LabeledData

logger = logging.getLogger(__name__)

pytestmark = [pytest.mark.slow, pytest.mark.acceptance]


class TestCartEquivalence:
    """Structural equivalence with Gini and variance CART over many data sets."""

    @pytest.mark.parametrize("seed", range(20))
    def test_gini(self, seed):
        """Test indicator-distance trees against Gini trees."""
        gen = np.random.default_rng(1000 + seed)
        n, p, K = int(gen.integers(50, 301)), int(gen.integers(2, 11)), int(gen.integers(2, 5))
        X = gen.uniform(size=(n, p))
        labels = gen.integers(0, K, size=n)
        hp = Hyperparams(projection_mode="binary" if seed % 2 else "axis")

        smerf_tree = grow_tree(X, indicator_distance(labels), hp, derive_stream(seed, 0))
        cart_tree = grow_reference_tree(X, LabeledData(labels=labels), hp, derive_stream(seed, 0))
        result = assert_tree_equivalence(smerf_tree, cart_tree)
        assert result.equivalent, str(result)

    @pytest.mark.parametrize("seed", range(20))
    def test_variance(self, seed):
        """Test half-squared-difference trees against variance trees."""
        gen = np.random.default_rng(2000 + seed)
        n, p = int(gen.integers(50, 301)), int(gen.integers(2, 11))
        X = gen.uniform(size=(n, p))
        y = X[:, 0] - 2.0 * X[:, -1] + 0.3 * gen.standard_normal(n)
        hp = Hyperparams(d=max(1, p // 2))

        smerf_tree = grow_tree(X, squared_half_distance(y), hp, derive_stream(seed, 0))
        cart_tree = grow_reference_tree(X, LabeledData(responses=y), hp, derive_stream(seed, 0))
        result = assert_tree_equivalence(smerf_tree, cart_tree)
        assert result.equivalent, str(result)


class TestTheory:
    """Per-tree identity, decomposition and tree-variance convergence."""

    @pytest.mark.parametrize("seed", range(10))
    def test_per_tree_identity(self, seed):
        """Test g_b(x, x') = (m_b(x) - m_b(x'))^2 / 2 exactly on every test pair."""
        data = gen_additive_theory(200, seed=seed)
        test = gen_additive_theory(30, seed=100 + seed)
        hp = Hyperparams(sampling="subsample", subsample_size=0.632)
        labeled = LabeledData(responses=data.y)

        tree = grow_tree(data.X, data.Z, hp, derive_stream(seed, 0))
        cart_tree = grow_reference_tree(data.X, labeled, hp, derive_stream(seed, 0))
        leaves = tree.apply(test.X)
        m = reference_predict(cart_tree, labeled, test.X)

        for i in range(30):
            for j in range(i + 1, 30):
                g = tree.leaf_distance(data.Z, leaves[i], leaves[j])
                assert g == 0.5 * (m[i] - m[j]) ** 2

    def test_decomposition_b50(self):
        """Test the per-pair decomposition with 50 trees."""
        data = gen_additive_theory(300, seed=7)
        forest = train_forest(data.X, data.Z, Hyperparams(num_trees=50, seed=7), responses=data.y)
        decomposition = variance_decomposition(forest, gen_additive_theory(100, seed=8).X)
        total = decomposition.plug_in + decomposition.tree_variance
        assert np.allclose(decomposition.forest_distance, total, rtol=1e-9, atol=0.0)

    def test_tree_variance_approaches_noise(self):
        """Test s_n at n = 4096 within [0.005, 0.02] and closer to 0.01 than at n = 64."""
        logger.info("🧪 Running the tree-variance sweep")

        rows = run_theory_check([64, 4096], 1, Hyperparams(num_trees=1000), test_points=200, seed=0)
        s_small, s_large = rows[0]["s_n"], rows[1]["s_n"]

        logger.info(f"✅ s_64={s_small:.5f}, s_4096={s_large:.5f}")
        assert 0.005 <= s_large <= 0.02
        assert abs(s_large - 0.01) < abs(s_small - 0.01)


class TestSimulationTrends:
    """Learning curves and importance on the simulated families."""

    def test_learning_curves(self):
        """Test RMSE falling in n and Spearman above 0.7 at n = 320."""
        rows = run_simbench(
            ["regression", "bilinear", "radial"], [20, 80, 320], 10,
            Hyperparams(num_trees=100), test_points=200, seed=0,
        )
        summary = {
            (row["family"], row["n"]): row
            for row in summarize(rows, ["family", "n"], ["map10", "spearman", "rmse"])
        }
        for family in ("regression", "bilinear", "radial"):
            curve = [summary[(family, n)]["rmse_mean"] for n in (20, 80, 320)]
            logger.info(f"{family} RMSE curve: {curve}")
            assert curve[0] > curve[1] > curve[2]
        assert summary[("regression", 320)]["spearman_mean"] > 0.7
        assert summary[("radial", 320)]["spearman_mean"] > 0.7

    def test_radial_importance(self):
        """Test that features 1 and 2 rank top two in at least 9 of 10 seeds."""
        hits = 0
        for seed in range(10):
            data = generate("radial", 320, seed=seed)
            forest = train_forest(data.X, data.Z, Hyperparams(num_trees=100, seed=seed))
            top = set(feature_importance(forest).ranking()[:2].tolist())
            hits += top == {0, 1}
        assert hits >= 9


class TestLinkPrediction:
    """Link prediction on the block model."""

    def test_structured_network(self):
        """Test AUC-ROC > 0.8 and AUC-PR above prevalence."""
        A, F = gen_sbm_network(200, 4, 0.5, 0.05, 0.1, seed=0)
        report = linkpred_replicate(A, F, 0.5, Hyperparams(num_trees=100), seed=0)
        test_density = A.sum() / (200 * 199)
        assert report["auc_roc"] > 0.8
        assert report["auc_pr"] > test_density

    def test_structureless_network(self):
        """Test AUC-ROC near 0.5 when p_in = p_out."""
        A, F = gen_sbm_network(200, 4, 0.2, 0.2, 0.1, seed=1)
        report = linkpred_replicate(A, F, 0.5, Hyperparams(num_trees=100), seed=1)
        assert 0.45 <= report["auc_roc"] <= 0.55


class TestDeterminism:
    """Bit-identical artifacts across worker counts."""

    def test_model_bytes_across_threads(self, tmp_path):
        """Test 1, 4 and 8 workers."""
        data = generate("radial", 120, seed=3)
        hp = Hyperparams(num_trees=40, seed=9, projection_mode="binary")
        blobs = {
            workers: save_forest(train_forest(data.X, data.Z, hp, n_jobs=workers), tmp_path / f"{workers}.smerf").read_bytes()
            for workers in (1, 4, 8)
        }
        assert blobs[1] == blobs[4] == blobs[8]

    def test_metric_tables_across_threads(self):
        """Test identical benchmark rows for 1 and 8 workers."""
        kwargs = dict(families=["bilinear"], sizes=[40], replicates=2, hp=Hyperparams(num_trees=20), test_points=30, seed=2)
        assert run_simbench(**kwargs, n_jobs=1) == run_simbench(**kwargs, n_jobs=8)
