"""Evaluation metrics for distance prediction and link prediction."""

from __future__ import annotations
import logging
from typing import Any, Iterable

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import average_precision_score, roc_auc_score

from .errors import (
    DegenerateRanksError,
    NoPositivesError,
    ShapeMismatchError,
    SingleClassError,
    TooFewPointsError,
    ValidationError,
)
from .types import EvalReport

_logger = logging.getLogger(__name__)

MAP_RELEVANT = 10
DISTANCE_METRICS = ("map10", "spearman", "rmse")


def _paired_squares(pred: Any, truth: Any, min_points: int) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[0] != pred.shape[1]:
        raise ShapeMismatchError(
            f"Need two square matrices of equal shape, got {pred.shape} and {truth.shape}"
        )
    if pred.shape[0] < min_points:
        raise TooFewPointsError(f"Need at least {min_points} points, got {pred.shape[0]}")
    return pred, truth


def _off_diagonal(values: np.ndarray) -> np.ndarray:
    """Row q of the result is row q of values without column q."""
    n = values.shape[0]
    return values[~np.eye(n, dtype=bool)].reshape(n, n - 1)


# ========== Distance metrics ==========

def rmse_pairs(pred: Any, truth: Any) -> float:
    """
    Root-mean-squared error over unordered pairs i < j.

    Raises:
        ShapeMismatchError: If the matrices differ in shape or are not square
        TooFewPointsError: If there are fewer than 2 points
    """
    pred, truth = _paired_squares(pred, truth, 2)
    iu = np.triu_indices(pred.shape[0], k=1)
    diff = pred[iu] - truth[iu]
    return float(np.sqrt(np.mean(diff * diff)))


def spearman_rows(pred: Any, truth: Any) -> tuple[np.ndarray, int]:
    """
    Per-point Spearman correlations, skipping points with a constant truth row.

    Returns:
        (correlations of evaluated points, number of skipped points)
    """
    pred, truth = _paired_squares(pred, truth, 3)
    truth_ranks = rankdata(_off_diagonal(truth), axis=1)
    pred_ranks = rankdata(_off_diagonal(pred), axis=1)

    tc = truth_ranks - truth_ranks.mean(axis=1, keepdims=True)
    pc = pred_ranks - pred_ranks.mean(axis=1, keepdims=True)
    t_norm = np.sqrt((tc * tc).sum(axis=1))
    p_norm = np.sqrt((pc * pc).sum(axis=1))

    keep = t_norm > 0
    skipped = int((~keep).sum())
    if skipped:
        _logger.warning(f"Skipped {skipped} point(s) with constant ground-truth distances")

    correlations = np.zeros(int(keep.sum()), dtype=np.float64)
    rows = np.flatnonzero(keep)
    informative = p_norm[rows] > 0
    r = rows[informative]
    correlations[informative] = (tc[r] * pc[r]).sum(axis=1) / (t_norm[r] * p_norm[r])
    return np.clip(correlations, -1.0, 1.0), skipped


def spearman_per_point(pred: Any, truth: Any) -> float:
    """
    Mean over points of the Spearman correlation between predicted and true
    distances to every other point (average ranks for ties).

    A constant predicted row correlates 0; a constant truth row is skipped.

    Raises:
        DegenerateRanksError: If every point has a constant truth row
    """
    correlations, skipped = spearman_rows(pred, truth)
    if correlations.size == 0:
        raise DegenerateRanksError(f"All {skipped} points have constant ground-truth rows")
    return float(correlations.mean())


def average_precision_at(pred_row: np.ndarray, truth_row: np.ndarray, others: np.ndarray) -> float:
    """AP of one point given its distances to ``others`` (ties broken by index)."""
    ranking = others[np.lexsort((others, pred_row))]
    relevant = others[np.lexsort((others, truth_row))][:MAP_RELEVANT]
    hits = np.isin(ranking, relevant)
    precision = np.cumsum(hits) / np.arange(1, ranking.size + 1)
    return float(precision[hits].sum()) / MAP_RELEVANT


def map_at_10(pred: Any, truth: Any) -> float:
    """
    Mean average precision with each point's 10 truth-nearest points relevant.

    Raises:
        TooFewPointsError: If there are fewer than 11 points
    """
    pred, truth = _paired_squares(pred, truth, MAP_RELEVANT + 1)
    n = pred.shape[0]
    scores = []
    for q in range(n):
        others = np.delete(np.arange(n), q)
        scores.append(average_precision_at(pred[q, others], truth[q, others], others))
    return float(np.mean(scores))


# ========== Link metrics ==========

def _binary_labels(scores: Any, labels: Any) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ShapeMismatchError(f"{scores.size} scores for {labels.size} labels")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("Link labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def auc_roc(scores: Any, labels: Any) -> float:
    """
    Area under the ROC curve (ties get half credit).

    Raises:
        SingleClassError: If only one class is present
    """
    scores, labels = _binary_labels(scores, labels)
    if np.unique(labels).size < 2:
        raise SingleClassError("AUC-ROC needs both positive and negative pairs")
    return float(roc_auc_score(labels, scores))


def auc_pr(scores: Any, labels: Any) -> float:
    """
    Area under the precision-recall curve in average-precision form.

    Tied scores share one threshold.

    Raises:
        NoPositivesError: If no label is positive
    """
    scores, labels = _binary_labels(scores, labels)
    if not labels.any():
        raise NoPositivesError("AUC-PR needs at least one positive pair")
    return float(average_precision_score(labels, scores))


# ========== Reports ==========

def evaluate_distances(
    pred: Any,
    truth: Any,
    metrics: Iterable[str] = DISTANCE_METRICS,
) -> EvalReport:
    """
    Distance-prediction report on one test set.

    mAP-10 is left out (with a warning) when fewer than 11 points exist.

    Args:
        pred: Predicted (n, n) distances
        truth: Ground-truth (n, n) distances
        metrics: Subset of ``map10``, ``spearman``, ``rmse``

    Returns:
        EvalReport
    """
    pred, truth = _paired_squares(pred, truth, 2)
    n = pred.shape[0]
    report = EvalReport(n_points=n, n_pairs=n * (n - 1) // 2)

    for name in metrics:
        if name == "rmse":
            report.metrics["rmse"] = rmse_pairs(pred, truth)
        elif name == "spearman":
            correlations, skipped = spearman_rows(pred, truth)
            if correlations.size == 0:
                raise DegenerateRanksError(f"All {skipped} points have constant ground-truth rows")
            report.metrics["spearman"] = float(correlations.mean())
            report.skipped_points = skipped
        elif name == "map10":
            if n <= MAP_RELEVANT:
                _logger.warning(f"mAP-10 needs at least {MAP_RELEVANT + 1} points, got {n}")
                continue
            report.metrics["map10"] = map_at_10(pred, truth)
        else:
            raise ValidationError(f"Unknown distance metric: {name}")
    return report


def evaluate_links(scores: Any, labels: Any) -> EvalReport:
    """AUC-ROC and AUC-PR of link scores (higher = more likely linked)."""
    scores, labels = _binary_labels(scores, labels)
    return EvalReport(
        metrics={"auc_roc": auc_roc(scores, labels), "auc_pr": auc_pr(scores, labels)},
        n_pairs=int(labels.size),
    )
