"""
Unit tests for validation, core types and random streams.
"""

import pytest
import logging

import numpy as np

from smerf.core import derive_stream, substream, validate_distance_matrix
from smerf.errors import (
    AsymmetryExceedsToleranceError,
    NonFiniteEntryError,
    NonSquareError,
    ShapeMismatchError,
    ValidationError,
)
from smerf.types import (
    DistanceMatrix,
    FeatureMatrix,
    Hyperparams,
    LabeledData,
    NodeSample,
    RunConfig,
    SparseProjection,
    SplitParams,
)

logger = logging.getLogger(__name__)


@pytest.mark.unit
class TestValidateDistanceMatrix:
    """Test distance-matrix validation."""

    def test_symmetric_input_passes_unchanged(self, random_symmetric, assert_symmetric):
        """Test that an exactly symmetric matrix is kept as is."""
        logger.info("🧪 Testing symmetric input")

        Z = random_symmetric(6, seed=1)
        result = validate_distance_matrix(Z)

        assert isinstance(result, DistanceMatrix)
        assert np.array_equal(result.values, Z)
        assert_symmetric(result)

        logger.info("✅ Symmetric input accepted")

    def test_small_asymmetry_is_averaged(self, random_symmetric, assert_symmetric):
        """Test that asymmetry within tolerance is averaged away."""
        logger.info("🧪 Testing small asymmetry")

        Z = random_symmetric(5, seed=2)
        Z[0, 3] += 1e-12
        result = validate_distance_matrix(Z)

        assert_symmetric(result)
        assert result.values[0, 3] == pytest.approx((Z[0, 3] + Z[3, 0]) / 2, abs=1e-15)

        logger.info("✅ Asymmetry averaged")

    def test_large_asymmetry_reports_pair(self, random_symmetric):
        """Test that a large asymmetry names the offending pair."""
        logger.info("🧪 Testing large asymmetry")

        Z = random_symmetric(5, seed=3)
        Z[1, 4] += 0.5

        with pytest.raises(AsymmetryExceedsToleranceError) as exc_info:
            validate_distance_matrix(Z)

        assert (exc_info.value.i, exc_info.value.j) == (1, 4)
        assert exc_info.value.exit_code == 2

        logger.info("✅ Asymmetric pair reported")

    def test_non_square(self):
        """Test non-square input."""
        logger.info("🧪 Testing non-square matrix")

        with pytest.raises(NonSquareError):
            validate_distance_matrix(np.zeros((3, 4)))

        logger.info("✅ Non-square rejected")

    def test_non_finite(self):
        """Test NaN entries."""
        logger.info("🧪 Testing NaN entry")

        Z = np.zeros((3, 3))
        Z[2, 1] = Z[1, 2] = np.nan

        with pytest.raises(NonFiniteEntryError):
            validate_distance_matrix(Z)

        logger.info("✅ NaN rejected")

    def test_negative_entries_allowed(self):
        """Test that negative distances are accepted."""
        Z = np.array([[0.0, -1.0], [-1.0, 0.0]])
        assert validate_distance_matrix(Z).values[0, 1] == -1.0


@pytest.mark.unit
class TestDataTypes:
    """Test FeatureMatrix, LabeledData and NodeSample invariants."""

    def test_feature_matrix_rejects_non_finite(self):
        """Test that infinite features are rejected."""
        with pytest.raises(ValidationError):
            FeatureMatrix(np.array([[0.0, np.inf]]))

    def test_feature_matrix_is_read_only(self):
        """Test that stored features cannot be mutated."""
        X = FeatureMatrix(np.ones((3, 2)))
        assert (X.n, X.p) == (3, 2)
        with pytest.raises(ValueError):
            X.values[0, 0] = 5.0

    def test_feature_matrix_rows(self):
        """Test row selection in the given order."""
        X = FeatureMatrix(np.arange(12.0).reshape(6, 2))
        sub = X.rows(np.array([4, 1]))
        assert isinstance(sub, FeatureMatrix)
        assert (sub.n, sub.p) == (2, 2)
        assert sub.values.tolist() == [[8.0, 9.0], [2.0, 3.0]]

    def test_distance_matrix_requires_exact_symmetry(self):
        """Test that the raw type refuses asymmetric values."""
        with pytest.raises(ValidationError):
            DistanceMatrix(np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]]))

    def test_labeled_data_exactly_one_field(self):
        """Test that labels and responses are exclusive."""
        logger.info("🧪 Testing LabeledData exclusivity")

        with pytest.raises(ValidationError):
            LabeledData()
        with pytest.raises(ValidationError):
            LabeledData(labels=[1, 2], responses=[0.5, 0.1])

        labeled = LabeledData(labels=[1, 1, 2, 3])
        assert labeled.kind == "class"
        assert labeled.num_classes == 3

        with pytest.raises(ShapeMismatchError):
            labeled.check_rows(5)

        logger.info("✅ LabeledData validated")

    def test_node_sample_allows_bootstrap_copies(self):
        """Test that repeated indices are kept as copies."""
        sample = NodeSample(np.array([0, 0, 3]))
        assert sample.n_s == 3

    def test_node_sample_rejects_empty(self):
        """Test that an empty node sample is rejected."""
        with pytest.raises(ValidationError):
            NodeSample(np.array([], dtype=int))


@pytest.mark.unit
class TestProjections:
    """Test projection and split types."""

    def test_axis_projection_selects_column(self):
        """Test axis-aligned projection."""
        X = np.arange(12, dtype=float).reshape(4, 3)
        projection = SparseProjection.axis(2)
        assert np.array_equal(projection.apply(X), X[:, 2])

    def test_binary_projection_signs(self):
        """Test that binary projections add and subtract columns."""
        X = np.array([[1.0, 2.0, 4.0]])
        projection = SparseProjection(features=(0, 2), weights=(1, -1), mode="binary")
        assert projection.apply(X)[0] == -3.0

    def test_invalid_projection_weights(self):
        """Test weight validation."""
        with pytest.raises(ValidationError):
            SparseProjection(features=(0,), weights=(2,), mode="binary")
        with pytest.raises(ValidationError):
            SparseProjection(features=(0, 0), weights=(1, 1), mode="binary")

    def test_split_routes_ties_left(self):
        """Test that projection == threshold goes left."""
        split = SplitParams(SparseProjection.axis(0), threshold=0.5)
        assert split.goes_left(np.array([[0.5], [0.50001]])).tolist() == [True, False]

    def test_projection_dict_round_trip(self):
        """Test to_dict/from_dict."""
        projection = SparseProjection(features=(1, 4), weights=(-1, 1), mode="binary")
        assert SparseProjection.from_dict(projection.to_dict()) == projection


@pytest.mark.unit
class TestHyperparams:
    """Test hyperparameter validation."""

    def test_defaults(self):
        """Test documented defaults."""
        hp = Hyperparams()
        assert hp.num_trees == 500
        assert hp.min_parent == 2
        assert hp.sampling == "bootstrap"
        assert hp.projection_mode == "axis"
        assert hp.candidates(20) == 4
        assert hp.fully_grown

    @pytest.mark.parametrize("field,value", [
        ("num_trees", 0),
        ("d", 0),
        ("min_parent", 1),
        ("nonzeros", 0.5),
        ("seed", -1),
        ("subsample_size", 1.5),
    ])
    def test_invalid_values_raise_validation_error(self, field, value):
        """Test constraint violations map onto ValidationError."""
        with pytest.raises(ValidationError) as exc_info:
            Hyperparams.build(**{field: value})
        assert exc_info.value.details["errors"]

    def test_axis_candidates_capped_at_p(self):
        """Test that axis mode never asks for more than p features."""
        assert Hyperparams(d=50).candidates(5) == 5
        assert Hyperparams(d=50, projection_mode="binary").candidates(5) == 50

    def test_bag_size(self):
        """Test bootstrap and subsample bag sizes."""
        assert Hyperparams().bag_size(30) == 30
        assert Hyperparams(sampling="subsample", subsample_size=0.5).bag_size(30) == 15
        assert Hyperparams(sampling="subsample", subsample_size=40).bag_size(30) == 30

    def test_run_config_missing_input(self, tmp_path):
        """Test that missing input files are reported."""
        config = RunConfig(command="train", inputs={"features": tmp_path / "nope.csv"})
        with pytest.raises(ValidationError) as exc_info:
            config.check_inputs()
        assert "features" in exc_info.value.details["missing"]


@pytest.mark.unit
class TestStreams:
    """Test deterministic per-tree random streams."""

    def test_same_key_same_stream(self):
        """Test determinism of derive_stream."""
        a = derive_stream(42, 7).random(5)
        b = derive_stream(42, 7).random(5)
        assert np.array_equal(a, b)

    def test_streams_differ_across_trees_and_seeds(self):
        """Test that neighbouring keys give different streams."""
        base = derive_stream(42, 7).random(5)
        assert not np.array_equal(base, derive_stream(42, 8).random(5))
        assert not np.array_equal(base, derive_stream(43, 7).random(5))

    def test_large_seed_accepted(self):
        """Test the full 64-bit seed range."""
        derive_stream(2**64 - 1, 0).random()

    def test_negative_tree_index(self):
        """Test that negative tree indices are rejected."""
        with pytest.raises(ValidationError):
            derive_stream(0, -1)

    def test_substream_path(self):
        """Test that substream keys separate streams."""
        assert substream(1, 2, 3).integers(1 << 30) == substream(1, 2, 3).integers(1 << 30)
