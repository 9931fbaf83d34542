"""Type definitions for smerf."""

from .data import FeatureMatrix, DistanceMatrix, LabeledData, SimulatedSet
from .split import NodeSample, SparseProjection, SplitParams, SplitScanResult
from .params import Hyperparams, RunConfig
from .reports import (
    OobReport,
    EvalReport,
    ImportanceVector,
    TreeEquivalence,
    VarianceDecomposition,
)

__all__ = [
    # Data
    'FeatureMatrix',
    'DistanceMatrix',
    'LabeledData',
    'SimulatedSet',

    # Splits
    'NodeSample',
    'SparseProjection',
    'SplitParams',
    'SplitScanResult',

    # Configuration
    'Hyperparams',
    'RunConfig',

    # Reports
    'OobReport',
    'EvalReport',
    'ImportanceVector',
    'TreeEquivalence',
    'VarianceDecomposition',
]
