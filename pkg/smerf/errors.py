"""Exception classes for smerf."""

from __future__ import annotations
from typing import Any


class SmerfError(Exception):
    """Base exception for all smerf errors."""

    exit_code_default = 3

    def __init__(
        self,
        message: str,
        exit_code: int | None = None,
        details: dict[str, Any] | None = None
    ):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code if exit_code is not None else self.exit_code_default
        self.details = details or {}

    def __str__(self) -> str:
        if self.exit_code:
            return f"[{self.exit_code}] {self.message}"
        return self.message


class UsageError(SmerfError):
    """Raised when command-line arguments are inconsistent."""
    exit_code_default = 1


class ValidationError(SmerfError):
    """Raised when input data or hyperparameters fail validation."""
    exit_code_default = 2


class NonSquareError(ValidationError):
    """Raised when a distance matrix is not square."""
    pass


class AsymmetryExceedsToleranceError(ValidationError):
    """Raised when |z_ij - z_ji| exceeds the symmetry tolerance."""

    def __init__(self, i: int, j: int, gap: float, tolerance: float):
        super().__init__(
            f"Asymmetry at ({i}, {j}): |z_ij - z_ji| = {gap:.3g} exceeds {tolerance:.3g}",
            details={"i": i, "j": j, "gap": gap, "tolerance": tolerance},
        )
        self.i = i
        self.j = j


class NonFiniteEntryError(ValidationError):
    """Raised when a matrix holds NaN or infinite entries."""

    def __init__(self, i: int, j: int | None = None):
        where = f"({i}, {j})" if j is not None else f"({i})"
        super().__init__(f"Non-finite entry at {where}", details={"i": i, "j": j})
        self.i = i
        self.j = j


class ShapeMismatchError(ValidationError):
    """Raised when two inputs disagree on their shapes."""
    pass


class DimensionMismatchError(ValidationError):
    """Raised when a feature vector has the wrong number of coordinates."""
    pass


class IndexOutOfRangeError(ValidationError):
    """Raised when a node sample references rows outside the data."""
    pass


class NotAPartitionError(ValidationError):
    """Raised when child samples do not partition their parent."""
    pass


class InvalidProbabilityError(ValidationError):
    """Raised when a probability parameter lies outside [0, 1]."""
    pass


class TreeError(SmerfError):
    """Raised for tree lookup failures."""
    pass


class UnknownLeafError(TreeError):
    """Raised when a leaf id does not belong to the tree."""
    pass


class ForestError(SmerfError):
    """Raised for forest-level evaluation failures."""
    exit_code_default = 2


class NoCoveredPairsError(ForestError):
    """Raised when no training pair is ever out of bag."""
    pass


class NotInReductionModeError(ForestError):
    """Raised when a diagnostic needs a fully grown regression-reduction forest."""
    pass


class MetricError(SmerfError):
    """Raised when an evaluation metric is undefined for its input."""
    exit_code_default = 2


class TooFewPointsError(MetricError):
    """Raised when a ranking metric has too few points."""
    pass


class SingleClassError(MetricError):
    """Raised when AUC-ROC is requested with one class only."""
    pass


class NoPositivesError(MetricError):
    """Raised when AUC-PR is requested without positives."""
    pass


class DegenerateRanksError(MetricError):
    """Raised when every point has a constant ground-truth row."""
    pass


class UnknownFamilyError(SmerfError):
    """Raised for an unknown simulated distance family."""
    exit_code_default = 1


class ModelFormatError(SmerfError):
    """Raised when a model file is malformed or from an unknown version."""
    exit_code_default = 2
