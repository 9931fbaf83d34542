"""Split and node-sample types."""

from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Literal

import math
import numpy as np

from ..errors import IndexOutOfRangeError, ValidationError

ProjectionMode = Literal["axis", "binary"]


@dataclass(frozen=True)
class SparseProjection:
    """
    Sparse {-1, +1} combination of feature columns.

    Attributes:
        features: Distinct feature indices
        weights: One weight in {-1, +1} per feature
        mode: ``axis`` (a single +1 term) or ``binary`` (sparse oblique)
    """
    features: tuple[int, ...]
    weights: tuple[int, ...]
    mode: ProjectionMode = "axis"

    def __post_init__(self) -> None:
        if not self.features:
            raise ValidationError("Projection needs at least one term")
        if len(self.features) != len(self.weights):
            raise ValidationError("Projection features and weights differ in length")
        if len(set(self.features)) != len(self.features):
            raise ValidationError(f"Duplicate feature in projection: {self.features}")
        if any(f < 0 for f in self.features):
            raise ValidationError(f"Negative feature index in projection: {self.features}")
        if any(w not in (-1, 1) for w in self.weights):
            raise ValidationError(f"Projection weights must be +-1: {self.weights}")
        if self.mode == "axis" and (len(self.features) != 1 or self.weights[0] != 1):
            raise ValidationError("Axis-aligned projection must be a single +1 term")

    @classmethod
    def axis(cls, feature: int) -> SparseProjection:
        """Singleton projection onto one feature."""
        return cls(features=(int(feature),), weights=(1,), mode="axis")

    def check_dims(self, p: int) -> None:
        if max(self.features) >= p:
            raise IndexOutOfRangeError(
                f"Projection uses feature {max(self.features)} but data has p={p}"
            )

    def apply(self, X: np.ndarray) -> np.ndarray:
        """
        Project rows of X.

        Terms are accumulated one column at a time in stored order, so a row
        projects to the same float whether it is evaluated alone or in a batch.

        Args:
            X: Array of shape (m, p)

        Returns:
            Array of shape (m,)
        """
        X = np.asarray(X, dtype=np.float64)
        if self.mode == "axis":
            return X[:, self.features[0]].copy()
        out = np.zeros(X.shape[0], dtype=np.float64)
        for f, w in zip(self.features, self.weights):
            if w > 0:
                out += X[:, f]
            else:
                out -= X[:, f]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"features": list(self.features), "weights": list(self.weights), "mode": self.mode}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SparseProjection:
        return cls(
            features=tuple(int(f) for f in data["features"]),
            weights=tuple(int(w) for w in data["weights"]),
            mode=data.get("mode", "axis"),
        )

    def __str__(self) -> str:
        terms = " ".join(f"{'+' if w > 0 else '-'}x{f}" for f, w in zip(self.features, self.weights))
        return f"[{terms}]"


@dataclass(frozen=True)
class SplitParams:
    """
    Split orientation and location: route left iff projection(x) <= threshold.

    Attributes:
        projection: Split direction
        threshold: Split location
    """
    projection: SparseProjection
    threshold: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold):
            raise ValidationError(f"Split threshold must be finite, got {self.threshold}")

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        return self.projection.apply(X) <= self.threshold


@dataclass(frozen=True, eq=False)
class NodeSample:
    """
    Training rows held by a node.

    Repeated indices are bootstrap copies of the same row.

    Attributes:
        indices: Row indices into X and Z
    """
    indices: np.ndarray

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices)
        if indices.ndim != 1 or indices.size < 1:
            raise ValidationError("Node sample must be a non-empty 1-D index list")
        if not np.issubdtype(indices.dtype, np.integer):
            raise ValidationError("Node sample indices must be integers")
        indices = indices.astype(np.intp, copy=True)
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def of(cls, indices: NodeSample | Any) -> NodeSample:
        if isinstance(indices, NodeSample):
            return indices
        return cls(np.asarray(indices))

    @property
    def n_s(self) -> int:
        return int(self.indices.size)

    def check_bounds(self, n: int) -> None:
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise IndexOutOfRangeError(
                f"Node sample indices must lie in [0, {n}), got "
                f"[{int(self.indices.min())}, {int(self.indices.max())}]"
            )

    def __len__(self) -> int:
        return self.n_s


@dataclass(frozen=True)
class SplitScanResult:
    """
    Best threshold found by a one-dimensional scan.

    Attributes:
        threshold: Midpoint between two consecutive distinct projected values
        gain: n_s*I(S) - n_L*I(S_L) - n_R*I(S_R)
        left_count: Points routed left
        right_count: Points routed right
    """
    threshold: float
    gain: float
    left_count: int
    right_count: int

    def __str__(self) -> str:
        return (
            f"SplitScanResult(threshold={self.threshold:.6g}, gain={self.gain:.6g}, "
            f"{self.left_count}|{self.right_count})"
        )
