"""Result and report types."""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class OobReport:
    """
    Out-of-bag evaluation over training pairs.

    A pair (i, j), i < j, is covered by a tree when neither endpoint is in
    that tree's bag.

    Attributes:
        rmse: RMSE of OOB predictions against z_ij over covered pairs
        covered_pairs: Pairs with at least one covering tree
        total_pairs: n(n-1)/2
        auc_roc: OOB AUC-ROC when Z is binary (labels 1 - z), else None
        auc_pr: OOB AUC-PR when Z is binary, else None
    """
    rmse: float
    covered_pairs: int
    total_pairs: int
    auc_roc: float | None = None
    auc_pr: float | None = None

    @property
    def coverage(self) -> float:
        return self.covered_pairs / self.total_pairs if self.total_pairs else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "oob_rmse": self.rmse,
            "covered_pairs": self.covered_pairs,
            "total_pairs": self.total_pairs,
            "oob_auc_roc": self.auc_roc,
            "oob_auc_pr": self.auc_pr,
        }

    def __str__(self) -> str:
        text = f"OOB RMSE {self.rmse:.6g} over {self.covered_pairs}/{self.total_pairs} pairs"
        if self.auc_roc is not None:
            text += f", AUC-ROC {self.auc_roc:.4f}, AUC-PR {self.auc_pr:.4f}"
        return text


@dataclass
class EvalReport:
    """
    Named metric values for one experiment run.

    Attributes:
        metrics: Metric name -> value (``map10``, ``spearman``, ``rmse``,
            ``auc_roc``, ``auc_pr``)
        n_points: Points evaluated
        n_pairs: Unordered pairs evaluated
        skipped_points: Points dropped by rank metrics (constant truth rows)
        settings: Hyperparameters selected per metric, when the run tuned them
    """
    metrics: dict[str, float] = field(default_factory=dict)
    n_points: int = 0
    n_pairs: int = 0
    skipped_points: int = 0
    settings: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.metrics[name]

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.metrics,
            "n_points": self.n_points,
            "n_pairs": self.n_pairs,
            "skipped_points": self.skipped_points,
        }

    def __str__(self) -> str:
        values = ", ".join(f"{k}={v:.4f}" for k, v in self.metrics.items())
        return f"EvalReport({values}; points={self.n_points}, pairs={self.n_pairs})"


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    """
    Per-feature importance.

    Attributes:
        raw: Sum of realized split gains per feature
        normalized: raw / max(raw), or zeros when no split was made
    """
    raw: np.ndarray
    normalized: np.ndarray

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> ImportanceVector:
        raw = np.asarray(raw, dtype=np.float64)
        top = float(raw.max()) if raw.size else 0.0
        normalized = raw / top if top > 0 else np.zeros_like(raw)
        return cls(raw=raw, normalized=normalized)

    def ranking(self) -> np.ndarray:
        """Feature indices by decreasing importance (stable on ties)."""
        return np.argsort(-self.normalized, kind="stable")


@dataclass(frozen=True)
class TreeEquivalence:
    """
    Outcome of a structural tree comparison.

    Attributes:
        equivalent: True when topology, splits and leaf sets all match
        path: Node path of the first divergence (``root/L/R...``)
        reason: What differed there
    """
    equivalent: bool
    path: str | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.equivalent

    def __str__(self) -> str:
        if self.equivalent:
            return "TreeEquivalence(equivalent)"
        return f"TreeEquivalence(diverges at {self.path}: {self.reason})"


@dataclass(frozen=True, eq=False)
class VarianceDecomposition:
    """
    Per-pair split of the forest distance into a plug-in and a tree-variance part.

    For a fully grown forest on z_ij = (y_i - y_j)^2 / 2, every pair satisfies
    ``forest_distance = plug_in + tree_variance`` up to rounding.

    Attributes:
        pairs: (k, 2) test-point index pairs, i < j
        forest_distance: (1/B) sum_b g_b(x_i, x_j)
        plug_in: (1/2) * (mean_b delta_b)^2
        tree_variance: (1/2) * biased variance over b of delta_b
    """
    pairs: np.ndarray
    forest_distance: np.ndarray
    plug_in: np.ndarray
    tree_variance: np.ndarray

    def summary(self) -> dict[str, float]:
        return {
            "forest_distance": float(self.forest_distance.mean()),
            "plug_in": float(self.plug_in.mean()),
            "tree_variance": float(self.tree_variance.mean()),
        }
