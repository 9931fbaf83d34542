"""
🌲 smerf - Distance-learning random forests in Python

Learn a pairwise distance function from features X and an observed
symmetric distance matrix Z, then predict distances between new points.

Example:
    >>> from smerf import Hyperparams, train_forest, predict_matrix, simdata
    >>>
    >>> train = simdata.gen_radial_distance(n=320, seed=1)
    >>> test = simdata.gen_radial_distance(n=200, seed=2)
    >>> forest = train_forest(train.X, train.Z, Hyperparams(num_trees=500, seed=7))
    >>> G = predict_matrix(forest, test.X)
"""

from . import simdata
from .core import (
    as_distance_matrix,
    as_feature_matrix,
    derive_stream,
    validate_distance_matrix,
)
from .errors import (
    SmerfError,
    UsageError,
    ValidationError,
    NonSquareError,
    AsymmetryExceedsToleranceError,
    NonFiniteEntryError,
    ShapeMismatchError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    NotAPartitionError,
    InvalidProbabilityError,
    TreeError,
    UnknownLeafError,
    ForestError,
    NoCoveredPairsError,
    NotInReductionModeError,
    MetricError,
    TooFewPointsError,
    SingleClassError,
    NoPositivesError,
    DegenerateRanksError,
    UnknownFamilyError,
    ModelFormatError,
)
from .forest import (
    SmerfForest,
    best_entry,
    default_grid,
    forest_responses_matrix,
    oob_rmse,
    predict_cross,
    predict_matrix,
    predict_pair,
    train_forest,
    tree_variance_term,
    tune,
    variance_decomposition,
)
from .importance import feature_importance
from .impurity import (
    avg_pairwise_distance,
    best_split_scan,
    gini_impurity,
    sample_variance,
    split_gain,
)
from .metrics import (
    auc_pr,
    auc_roc,
    evaluate_distances,
    evaluate_links,
    map_at_10,
    rmse_pairs,
    spearman_per_point,
)
from .model_file import load_forest, save_forest
from .reductions import (
    absolute_distance,
    assert_tree_equivalence,
    grow_reference_tree,
    indicator_distance,
    reference_predict,
    squared_half_distance,
)
from .tree import (
    SmerfTree,
    TreeNode,
    grow_tree,
    leaf_of,
    sample_projections,
    tree_leaf_distance,
    tree_predict,
)
from .types import (
    FeatureMatrix,
    DistanceMatrix,
    LabeledData,
    SimulatedSet,
    NodeSample,
    SparseProjection,
    SplitParams,
    SplitScanResult,
    Hyperparams,
    RunConfig,
    OobReport,
    EvalReport,
    ImportanceVector,
    TreeEquivalence,
    VarianceDecomposition,
)
from .utils import __version__, __author__, __license__, setup_logging

__all__ = [
    # Core
    'validate_distance_matrix',
    'as_feature_matrix',
    'as_distance_matrix',
    'derive_stream',

    # Impurity
    'avg_pairwise_distance',
    'gini_impurity',
    'sample_variance',
    'split_gain',
    'best_split_scan',

    # Trees
    'SmerfTree',
    'TreeNode',
    'sample_projections',
    'grow_tree',
    'leaf_of',
    'tree_leaf_distance',
    'tree_predict',

    # Forests
    'SmerfForest',
    'train_forest',
    'predict_pair',
    'predict_matrix',
    'predict_cross',
    'oob_rmse',
    'tune',
    'best_entry',
    'default_grid',
    'forest_responses_matrix',
    'variance_decomposition',
    'tree_variance_term',

    # Reductions
    'indicator_distance',
    'squared_half_distance',
    'absolute_distance',
    'grow_reference_tree',
    'reference_predict',
    'assert_tree_equivalence',

    # Importance
    'feature_importance',

    # Metrics
    'rmse_pairs',
    'spearman_per_point',
    'map_at_10',
    'auc_roc',
    'auc_pr',
    'evaluate_distances',
    'evaluate_links',

    # Persistence
    'save_forest',
    'load_forest',

    # Simulation
    'simdata',

    # Types
    'FeatureMatrix',
    'DistanceMatrix',
    'LabeledData',
    'SimulatedSet',
    'NodeSample',
    'SparseProjection',
    'SplitParams',
    'SplitScanResult',
    'Hyperparams',
    'RunConfig',
    'OobReport',
    'EvalReport',
    'ImportanceVector',
    'TreeEquivalence',
    'VarianceDecomposition',

    # Exceptions
    'SmerfError',
    'UsageError',
    'ValidationError',
    'NonSquareError',
    'AsymmetryExceedsToleranceError',
    'NonFiniteEntryError',
    'ShapeMismatchError',
    'DimensionMismatchError',
    'IndexOutOfRangeError',
    'NotAPartitionError',
    'InvalidProbabilityError',
    'TreeError',
    'UnknownLeafError',
    'ForestError',
    'NoCoveredPairsError',
    'NotInReductionModeError',
    'MetricError',
    'TooFewPointsError',
    'SingleClassError',
    'NoPositivesError',
    'DegenerateRanksError',
    'UnknownFamilyError',
    'ModelFormatError',

    # Metadata
    '__version__',
    '__author__',
    '__license__',
    'setup_logging',
]
