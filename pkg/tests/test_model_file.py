"""
Unit tests for the binary model file.
"""

import pytest
import logging

import numpy as np

from smerf.errors import ModelFormatError
from smerf.forest import predict_matrix, train_forest
from smerf.model_file import MAGIC, load_forest, save_forest, z_digest
from smerf.reductions import assert_tree_equivalence
from smerf.simdata import gen_additive_theory
from smerf.types import Hyperparams

logger = logging.getLogger(__name__)


@pytest.fixture
def saved_forest(small_forest, tmp_path):
    """``small_forest`` written to a temporary model file."""
    return small_forest, save_forest(small_forest, tmp_path / "model.smerf")


@pytest.mark.unit
class TestModelFile:
    """Test saving and loading forests."""

    def test_loaded_forest_predicts_identically(self, rng, saved_forest):
        """Test identical predictions after a save/load cycle."""
        logger.info("🧪 Testing predictions of a reloaded model")

        forest, path = saved_forest
        loaded = load_forest(path)
        X_test = rng.uniform(size=(10, 3))

        assert np.array_equal(predict_matrix(loaded, X_test, n_jobs=1), predict_matrix(forest, X_test, n_jobs=1))
        assert loaded.hp == forest.hp
        assert (loaded.n, loaded.p, loaded.num_trees) == (forest.n, forest.p, forest.num_trees)
        for t1, t2 in zip(forest.trees, loaded.trees):
            assert assert_tree_equivalence(t1, t2).equivalent
            assert np.array_equal(t1.bag, t2.bag)

        logger.info("✅ Reloaded model matches")

    def test_resave_is_byte_identical(self, saved_forest, tmp_path):
        """Test that load then save reproduces the file."""
        _, path = saved_forest
        again = save_forest(load_forest(path), tmp_path / "again.smerf")
        assert again.read_bytes() == path.read_bytes()

    def test_binary_projections_and_responses(self, tmp_path):
        """Test oblique splits and stored responses survive."""
        data = gen_additive_theory(30, seed=0, p=4)
        hp = Hyperparams(num_trees=3, projection_mode="binary", nonzeros=2.0)
        forest = train_forest(data.X, data.Z, hp, n_jobs=1, responses=data.y)
        loaded = load_forest(save_forest(forest, tmp_path / "m.smerf"))

        assert np.array_equal(loaded.responses, data.y)
        for t1, t2 in zip(forest.trees, loaded.trees):
            assert assert_tree_equivalence(t1, t2).equivalent

    def test_stores_training_distances(self, saved_forest):
        """Test that the training Z is stored with its hash."""
        forest, path = saved_forest
        loaded = load_forest(path)
        assert np.array_equal(loaded.train_Z.values, forest.train_Z.values)
        assert z_digest(loaded.train_Z) == z_digest(forest.train_Z)

    def test_bad_magic(self, tmp_path):
        """Test a file that is not a model."""
        path = tmp_path / "junk.smerf"
        path.write_bytes(b"NOTAMODEL" + bytes(32))
        with pytest.raises(ModelFormatError):
            load_forest(path)

    def test_unknown_version(self, saved_forest, tmp_path):
        """Test a future format version."""
        _, path = saved_forest
        blob = bytearray(path.read_bytes())
        blob[len(MAGIC)] = 99
        bad = tmp_path / "future.smerf"
        bad.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="version"):
            load_forest(bad)

    def test_truncated(self, saved_forest, tmp_path):
        """Test a file cut short."""
        _, path = saved_forest
        bad = tmp_path / "short.smerf"
        bad.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ModelFormatError):
            load_forest(bad)

    def test_trailing_bytes(self, saved_forest, tmp_path):
        """Test extra bytes after the arrays."""
        _, path = saved_forest
        bad = tmp_path / "long.smerf"
        bad.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ModelFormatError):
            load_forest(bad)

    def test_corrupted_distances(self, saved_forest, tmp_path):
        """Test that a flipped byte in the stored Z fails the hash check."""
        forest, path = saved_forest
        blob = bytearray(path.read_bytes())
        # train_Z is the last array when no responses are stored
        offset = len(blob) - forest.train_Z.values.nbytes + 8
        blob[offset] ^= 0xFF
        bad = tmp_path / "corrupt.smerf"
        bad.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="hash"):
            load_forest(bad)

    def test_missing_file(self, tmp_path):
        """Test an unreadable path."""
        with pytest.raises(ModelFormatError):
            load_forest(tmp_path / "absent.smerf")


@pytest.mark.unit
class TestStructureValidation:
    """Test that damaged tree structure fails at load time."""

    def test_projection_feature_beyond_p(self, saved_forest, tmp_path, patch_model_array):
        """Test a split on feature 99 of a 3-feature model."""
        logger.info("🧪 Testing an out-of-range projection feature")

        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "feature.smerf", "proj_features", 0, 99)
        with pytest.raises(ModelFormatError, match="feature 99"):
            load_forest(bad)

        logger.info("✅ Rejected at load")

    def test_child_outside_tree(self, saved_forest, tmp_path, patch_model_array):
        """Test a root whose left child points past the tree."""
        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "child.smerf", "left", 0, 10**6)
        with pytest.raises(ModelFormatError, match="children"):
            load_forest(bad)

    def test_child_pointing_backwards(self, saved_forest, tmp_path, patch_model_array):
        """Test a root that names itself as a child."""
        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "cycle.smerf", "right", 0, 0)
        with pytest.raises(ModelFormatError, match="children"):
            load_forest(bad)

    def test_unknown_projection_mode(self, saved_forest, tmp_path, patch_model_array):
        """Test a split with a mode code outside axis and binary."""
        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "mode.smerf", "mode", 0, 7)
        with pytest.raises(ModelFormatError, match="mode"):
            load_forest(bad)

    @pytest.mark.parametrize("name,value", [("members", 40), ("members", -1), ("bags", 1000)])
    def test_rows_outside_training_set(self, saved_forest, tmp_path, patch_model_array, name, value):
        """Test leaf members and bags naming rows the model does not have."""
        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "rows.smerf", name, 0, value)
        with pytest.raises(ModelFormatError, match=name):
            load_forest(bad)

    def test_tree_offsets_out_of_order(self, saved_forest, tmp_path, patch_model_array):
        """Test a tree offset table that runs backwards."""
        _, path = saved_forest
        bad = patch_model_array(path, tmp_path / "offsets.smerf", "tree_offsets", 1, 10**6)
        with pytest.raises(ModelFormatError, match="tree_offsets"):
            load_forest(bad)

    def test_tree_count_disagrees_with_offsets(self, saved_forest, tmp_path):
        """Test a header claiming more trees than the offset table holds."""
        forest, path = saved_forest
        blob = path.read_bytes()
        claimed = f'"num_trees":{forest.num_trees}'.encode()
        assert forest.num_trees == 10 and claimed in blob
        bad = tmp_path / "count.smerf"
        # the hyperparams object also holds num_trees and sorts first
        head, _, tail = blob.rpartition(claimed)
        bad.write_bytes(head + b'"num_trees":11' + tail)
        with pytest.raises(ModelFormatError, match="tree_offsets"):
            load_forest(bad)

    def test_duplicate_leaf_ids(self, tmp_path, patch_model_array):
        """Test a tree whose leaves are not numbered 0..L-1."""
        data = gen_additive_theory(30, seed=1, p=2)
        forest = train_forest(data.X, data.Z, Hyperparams(num_trees=1), n_jobs=1)
        path = save_forest(forest, tmp_path / "one.smerf")
        leaf = next(node.node_id for node in forest.trees[0].nodes if node.is_leaf and node.leaf_id == 1)
        bad = patch_model_array(path, tmp_path / "leaves.smerf", "leaf_id", leaf, 0)
        with pytest.raises(ModelFormatError, match="Leaf ids"):
            load_forest(bad)
