"""Training data containers."""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from ..errors import (
    DimensionMismatchError,
    NonFiniteEntryError,
    NonSquareError,
    ShapeMismatchError,
    ValidationError,
)


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _first_non_finite(values: np.ndarray) -> tuple[int, ...]:
    bad = np.argwhere(~np.isfinite(values))
    return tuple(int(k) for k in bad[0])


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    n x p real-valued observations, one row per point.

    Attributes:
        values: Read-only float64 array of shape (n, p)
    """
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2:
            raise DimensionMismatchError(f"Feature matrix must be 2-D, got {values.ndim}-D")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError(f"Feature matrix needs n >= 1 and p >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteEntryError(*_first_non_finite(values))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def p(self) -> int:
        return int(self.values.shape[1])

    def __array__(self, dtype: Any = None, copy: bool | None = None) -> np.ndarray:
        return self.values if dtype is None else self.values.astype(dtype)

    def rows(self, indices: np.ndarray) -> FeatureMatrix:
        """Return the sub-matrix holding the given rows."""
        return FeatureMatrix(self.values[np.asarray(indices, dtype=np.intp)])

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"FeatureMatrix(n={self.n}, p={self.p})"


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """
    n x n symmetric matrix of observed pairwise distances.

    Negative entries are allowed; the diagonal is used as given. Build
    instances through ``smerf.core.validate_distance_matrix`` when the input
    may be slightly asymmetric.

    Attributes:
        values: Read-only float64 array of shape (n, n), exactly symmetric
    """
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise NonSquareError(f"Distance matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteEntryError(*_first_non_finite(values))
        if not np.array_equal(values, values.T):
            raise ValidationError("Distance matrix is not exactly symmetric")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __array__(self, dtype: Any = None, copy: bool | None = None) -> np.ndarray:
        return self.values if dtype is None else self.values.astype(dtype)

    def block(self, rows: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        """Return the sub-matrix Z[rows, cols] (cols default to rows)."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = rows if cols is None else np.asarray(cols, dtype=np.intp)
        return self.values[np.ix_(rows, cols)]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"DistanceMatrix(n={self.n})"


@dataclass(frozen=True, eq=False)
class LabeledData:
    """
    Class labels or continuous responses attached to training rows.

    Exactly one of ``labels`` and ``responses`` is set.

    Attributes:
        labels: Integer class ids (any integer coding)
        responses: Real-valued responses
    """
    labels: np.ndarray | None = None
    responses: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.labels is None) == (self.responses is None):
            raise ValidationError("Provide exactly one of labels or responses")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.size < 1:
                raise ValidationError("Labels must be a non-empty 1-D sequence")
            if not np.issubdtype(labels.dtype, np.integer):
                rounded = np.rint(labels.astype(np.float64))
                if not np.array_equal(rounded, labels.astype(np.float64)):
                    raise ValidationError("Class labels must be integers")
                labels = rounded.astype(np.int64)
            labels = labels.astype(np.int64, copy=True)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        else:
            responses = np.asarray(self.responses, dtype=np.float64)
            if responses.ndim != 1 or responses.size < 1:
                raise ValidationError("Responses must be a non-empty 1-D sequence")
            if not np.all(np.isfinite(responses)):
                raise NonFiniteEntryError(int(np.argmin(np.isfinite(responses))))
            object.__setattr__(self, "responses", _frozen(responses))

    @property
    def kind(self) -> Literal["class", "reg"]:
        return "class" if self.labels is not None else "reg"

    @property
    def values(self) -> np.ndarray:
        return self.labels if self.labels is not None else self.responses  # type: ignore[return-value]

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_classes(self) -> int:
        """Number of distinct classes (K); 0 for responses."""
        if self.labels is None:
            return 0
        return int(np.unique(self.labels).size)

    def check_rows(self, n: int) -> None:
        if self.n != n:
            raise ShapeMismatchError(f"{self.n} labels/responses for {n} rows")


@dataclass(frozen=True, eq=False)
class SimulatedSet:
    """
    One simulated training or test set.

    Attributes:
        family: Generator name (regression, bilinear, radial, theory)
        X: Feature matrix
        Z: Ground-truth distance matrix
        Q: Similarity matrix (1 - Z) for the bounded families
        y: Latent responses, when the family has them
    """
    family: str
    X: FeatureMatrix
    Z: DistanceMatrix
    Q: np.ndarray | None = None
    y: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.n

    def __repr__(self) -> str:
        return f"SimulatedSet(family={self.family!r}, n={self.X.n}, p={self.X.p})"
