"""Forest training, ensemble prediction, out-of-bag evaluation and tuning."""

from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from ._helpers import parallel_map
from .core import as_distance_matrix, as_feature_matrix, derive_stream
from .errors import (
    DimensionMismatchError,
    MetricError,
    NoCoveredPairsError,
    NotInReductionModeError,
    ShapeMismatchError,
    TooFewPointsError,
    ValidationError,
)
from .impurity import PairwiseCriterion, SplitCriterion
from .metrics import auc_pr, auc_roc
from .tree import SmerfTree, grow_with_criterion, tree_predict
from .types import (
    DistanceMatrix,
    FeatureMatrix,
    Hyperparams,
    OobReport,
    VarianceDecomposition,
)

_logger = logging.getLogger(__name__)

TuneCriterion = Literal["rmse", "auc_roc", "auc_pr"]

GRID_EXPONENTS = (0.25, 0.5, 0.75, 1.0, 1.5)
GRID_MIN_PARENT = (2, 4, 8)

# Trees whose per-tree prediction matrices are held at once.
PREDICT_CHUNK = 64
PAIR_CHUNK = 4096


@dataclass(eq=False)
class SmerfForest:
    """
    Trained ensemble.

    Attributes:
        trees: B grown trees, tree b grown from derive_stream(hp.seed, b)
        hp: Hyperparameters used for training
        train_Z: Training distances (leaf distances are averages of these)
        n: Training rows
        p: Feature dimension
        responses: Latent responses when trained in regression-reduction mode
    """
    trees: list[SmerfTree]
    hp: Hyperparams
    train_Z: DistanceMatrix
    n: int
    p: int
    responses: np.ndarray | None = None

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def train_X_dims(self) -> tuple[int, int]:
        return self.n, self.p

    def __repr__(self) -> str:
        return f"SmerfForest(B={self.num_trees}, n={self.n}, p={self.p}, {self.hp})"


# ========== Training ==========

def train_forest(
    X: Any,
    Z: Any,
    hp: Hyperparams,
    n_jobs: int | None = None,
    responses: Any = None,
    criterion: SplitCriterion | None = None,
) -> SmerfForest:
    """
    Train B SMERF trees.

    Tree b is grown from ``derive_stream(hp.seed, b)`` alone, so the forest is
    identical for every worker count.

    Args:
        X: Training features (n x p)
        Z: Training distances (n x n)
        hp: Hyperparameters
        n_jobs: Worker threads (capped by SMERF_THREADS)
        responses: Latent y when Z = (y_i - y_j)^2 / 2; enables the variance
            decomposition
        criterion: Split objective; defaults to the pairwise objective on Z.
            A VarianceCriterion on ``responses`` grows the same trees faster.

    Returns:
        SmerfForest

    Raises:
        ShapeMismatchError: If X, Z and responses disagree on n

    Example:
        >>> forest = train_forest(X, Z, Hyperparams(num_trees=100, seed=7))
        >>> G = predict_matrix(forest, X_test)
    """
    X = as_feature_matrix(X)
    Z = as_distance_matrix(Z)
    if X.n != Z.n:
        raise ShapeMismatchError(f"X has {X.n} rows but Z is {Z.n}x{Z.n}")

    y = None
    if responses is not None:
        y = np.asarray(responses, dtype=np.float64).ravel()
        if y.size != X.n:
            raise ShapeMismatchError(f"{y.size} responses for {X.n} rows")
        y.setflags(write=False)

    criterion = criterion or PairwiseCriterion(Z)
    if criterion.n != X.n:
        raise ShapeMismatchError(f"Criterion covers {criterion.n} rows, X has {X.n}")

    def grow(b: int) -> SmerfTree:
        return grow_with_criterion(X, criterion, hp, derive_stream(hp.seed, b))

    trees = parallel_map(grow, range(hp.num_trees), n_jobs)
    forest = SmerfForest(trees=trees, hp=hp, train_Z=Z, n=X.n, p=X.p, responses=y)
    _logger.info(
        f"Trained {forest.num_trees} trees on n={X.n}, p={X.p} "
        f"(mean leaves {np.mean([t.num_leaves for t in trees]):.1f})"
    )
    return forest


# ========== Prediction ==========

def _test_rows(forest: SmerfForest, X: Any) -> np.ndarray:
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    if values.ndim != 2 or values.shape[1] != forest.p:
        raise DimensionMismatchError(
            f"Forest was trained on p={forest.p} features, got shape {values.shape}"
        )
    return values


def predict_pair(forest: SmerfForest, x: Any, x_prime: Any) -> float:
    """
    Forest distance between two points: mean over trees of tree predictions.

    Raises:
        DimensionMismatchError: If either vector does not have p coordinates
    """
    per_tree = np.array([tree_predict(t, forest.train_Z, x, x_prime) for t in forest.trees])
    return float(np.mean(per_tree))


def _tree_cross(tree: SmerfTree, Z: DistanceMatrix, A: np.ndarray, B: np.ndarray | None) -> np.ndarray:
    leaves_a = tree.apply(A)
    leaves_b = leaves_a if B is None else tree.apply(B)
    distinct, inverse = np.unique(np.concatenate([leaves_a, leaves_b]), return_inverse=True)
    table = tree.leaf_distance_table(Z, distinct)
    inv_a, inv_b = inverse[: leaves_a.size], inverse[leaves_a.size:]
    return table[np.ix_(inv_a, inv_b)]


def _ordered_sum(forest: SmerfForest, A: np.ndarray, B: np.ndarray | None, n_jobs: int | None) -> np.ndarray:
    total = np.zeros((A.shape[0], A.shape[0] if B is None else B.shape[0]), dtype=np.float64)
    for start in range(0, forest.num_trees, PREDICT_CHUNK):
        chunk = forest.trees[start:start + PREDICT_CHUNK]
        for matrix in parallel_map(lambda t: _tree_cross(t, forest.train_Z, A, B), chunk, n_jobs):
            total += matrix
    return total


def predict_matrix(forest: SmerfForest, X_test: Any, n_jobs: int | None = None) -> np.ndarray:
    """
    All pairwise forest distances among test points.

    Each tree routes every test point once and looks leaf pairs up in a
    leaf-distance table; per-tree matrices are summed in tree order.

    Args:
        forest: Trained forest
        X_test: Test features (m x p)
        n_jobs: Worker threads

    Returns:
        Symmetric (m, m) array
    """
    A = _test_rows(forest, X_test)
    return _ordered_sum(forest, A, None, n_jobs) / forest.num_trees


def predict_cross(forest: SmerfForest, X_a: Any, X_b: Any, n_jobs: int | None = None) -> np.ndarray:
    """Forest distances between every row of X_a and every row of X_b."""
    A = _test_rows(forest, X_a)
    B = _test_rows(forest, X_b)
    return _ordered_sum(forest, A, B, n_jobs) / forest.num_trees


# ========== Out-of-bag evaluation ==========

def _is_binary(values: np.ndarray) -> bool:
    return bool(np.isin(values, (0.0, 1.0)).all())


def oob_rmse(forest: SmerfForest, X: Any, Z: Any, n_jobs: int | None = None) -> OobReport:
    """
    Out-of-bag evaluation over training pairs.

    A pair (i, j), i < j, is predicted by averaging the trees whose bag holds
    neither endpoint. Pairs no tree covers are excluded and counted. When Z is
    0/1 (link prediction, z = 1 - a) the report also carries OOB AUC-ROC and
    AUC-PR with link score 1 - prediction.

    Args:
        forest: Forest trained on (X, Z)
        X: Training features
        Z: Training distances

    Returns:
        OobReport

    Raises:
        NoCoveredPairsError: If every pair is in-bag for every tree
    """
    X = as_feature_matrix(X)
    Z = as_distance_matrix(Z)
    if X.n != forest.n or Z.n != forest.n:
        raise ShapeMismatchError(f"Forest was trained on n={forest.n}, got X {X.n}, Z {Z.n}")

    n = forest.n
    sums = np.zeros((n, n), dtype=np.float64)
    counts = np.zeros((n, n), dtype=np.int64)

    def tree_oob(tree: SmerfTree) -> tuple[np.ndarray, np.ndarray] | None:
        rows = np.flatnonzero(tree.out_of_bag(n))
        if rows.size < 2:
            return None
        return rows, _tree_cross(tree, forest.train_Z, X.values[rows], None)

    for result in parallel_map(tree_oob, forest.trees, n_jobs):
        if result is None:
            continue
        rows, matrix = result
        block = np.ix_(rows, rows)
        sums[block] += matrix
        counts[block] += 1

    iu = np.triu_indices(n, k=1)
    covered = counts[iu] > 0
    total_pairs = int(iu[0].size)
    covered_pairs = int(covered.sum())
    if covered_pairs == 0:
        raise NoCoveredPairsError(f"None of the {total_pairs} training pairs is out of bag for any tree")
    if covered_pairs < total_pairs:
        _logger.warning(f"{total_pairs - covered_pairs} of {total_pairs} pairs have no OOB tree")

    pred = sums[iu][covered] / counts[iu][covered]
    truth = Z.values[iu][covered]
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))

    roc = pr = None
    if _is_binary(Z.values):
        links = (1.0 - truth).astype(np.int64)
        try:
            roc = auc_roc(1.0 - pred, links)
            pr = auc_pr(1.0 - pred, links)
        except MetricError as e:
            _logger.warning(f"OOB AUCs unavailable: {e.message}")
            roc = pr = None

    report = OobReport(rmse=rmse, covered_pairs=covered_pairs, total_pairs=total_pairs, auc_roc=roc, auc_pr=pr)
    _logger.debug(f"{report} (coverage {report.coverage:.3f})")
    return report


# ========== Tuning ==========

def default_grid(p: int, base: Hyperparams | None = None, network: bool = False) -> list[Hyperparams]:
    """
    Hyperparameter grid over d and min_parent.

    d takes p^(1/4), p^(1/2), p^(3/4), p and p^(3/2) rounded (min 1); networks
    drop p^(3/2) and axis mode caps d at p. min_parent takes 2, 4 and 8.
    Entries come in (d, min_parent) order; repeats after rounding are kept so
    the earlier one wins ties.
    """
    base = base or Hyperparams()
    exponents = GRID_EXPONENTS[:-1] if network else GRID_EXPONENTS
    grid = []
    for exponent in exponents:
        d = max(1, round(p ** exponent))
        if base.projection_mode == "axis":
            d = min(d, p)
        for min_parent in GRID_MIN_PARENT:
            grid.append(base.updated(d=d, min_parent=min_parent))
    return grid


def _tune_score(report: OobReport, criterion: TuneCriterion) -> float:
    if criterion == "rmse":
        return report.rmse
    value = getattr(report, criterion)
    if value is None:
        raise ValidationError(f"Criterion {criterion} needs a 0/1 distance matrix with both classes")
    return -value


def best_entry(reports: list[OobReport], criterion: TuneCriterion = "rmse") -> int:
    """
    Index of the best OOB report: lowest RMSE or highest AUC, earliest on ties.

    Raises:
        ValidationError: If reports is empty or an AUC is missing
    """
    if not reports:
        raise ValidationError("No OOB reports to choose from")
    scores = [_tune_score(report, criterion) for report in reports]
    return int(np.argmin(scores))


def tune(
    X: Any,
    Z: Any,
    grid: list[Hyperparams],
    seed: int | None = None,
    criterion: TuneCriterion = "rmse",
    n_jobs: int | None = None,
) -> tuple[Hyperparams, list[OobReport]]:
    """
    Select hyperparameters by out-of-bag performance.

    One forest is trained per grid entry. RMSE is minimized, AUCs are
    maximized, and ties go to the earlier entry. The returned reports can be
    passed to ``best_entry`` to select under another criterion without
    retraining.

    Args:
        X: Training features
        Z: Training distances
        grid: Candidate hyperparameters, in priority order
        seed: Overrides every entry's seed when given
        criterion: ``rmse``, ``auc_roc`` or ``auc_pr``
        n_jobs: Worker threads

    Returns:
        (best hyperparameters, one OobReport per grid entry)

    Raises:
        ValidationError: If the grid is empty or an AUC criterion is used on
            non-binary Z
    """
    if not grid:
        raise ValidationError("Tuning grid is empty")
    X = as_feature_matrix(X)
    Z = as_distance_matrix(Z)

    reports: list[OobReport] = []
    for index, hp in enumerate(grid):
        if seed is not None:
            hp = hp.updated(seed=seed)
        report = oob_rmse(train_forest(X, Z, hp, n_jobs), X, Z, n_jobs)
        _tune_score(report, criterion)
        reports.append(report)
        _logger.info(f"Grid {index + 1}/{len(grid)} d={hp.d} min_parent={hp.min_parent}: {report}")

    best_index = best_entry(reports, criterion)
    best = grid[best_index] if seed is None else grid[best_index].updated(seed=seed)
    _logger.info(f"Selected grid entry {best_index + 1}: {best}")
    return best, reports


# ========== Variance decomposition ==========

def _require_reduction_mode(forest: SmerfForest) -> np.ndarray:
    if forest.responses is None:
        raise NotInReductionModeError("Forest was trained without latent responses")
    if not forest.hp.fully_grown:
        raise NotInReductionModeError(
            "Decomposition needs fully grown trees (min_parent=2, no depth limit)"
        )
    return forest.responses


def forest_responses_matrix(forest: SmerfForest, X_test: Any, n_jobs: int | None = None) -> np.ndarray:
    """
    Per-tree leaf means m_b(x) of the latent responses.

    Returns:
        (B, m) array

    Raises:
        NotInReductionModeError: If the forest has no responses
    """
    if forest.responses is None:
        raise NotInReductionModeError("Forest was trained without latent responses")
    A = _test_rows(forest, X_test)
    y = forest.responses
    return np.vstack(parallel_map(lambda t: t.leaf_means(y)[t.apply(A)], forest.trees, n_jobs))


def variance_decomposition(forest: SmerfForest, X_test: Any, n_jobs: int | None = None) -> VarianceDecomposition:
    """
    Split each test pair's forest distance into plug-in and tree-variance parts.

    With delta_b = m_b(x) - m_b(x'), a fully grown forest on half squared
    response differences satisfies, for every pair,
    mean_b g_b = (mean_b delta_b)^2 / 2 + var_b(delta_b) / 2.

    Raises:
        NotInReductionModeError: Outside fully grown regression-reduction mode
        TooFewPointsError: With fewer than 2 test points
    """
    _require_reduction_mode(forest)
    A = _test_rows(forest, X_test)
    m = A.shape[0]
    if m < 2:
        raise TooFewPointsError(f"Need at least 2 test points, got {m}")

    M = forest_responses_matrix(forest, A, n_jobs)
    i, j = np.triu_indices(m, k=1)
    delta_bar = np.empty(i.size, dtype=np.float64)
    var_delta = np.empty(i.size, dtype=np.float64)
    for start in range(0, i.size, PAIR_CHUNK):
        part = slice(start, start + PAIR_CHUNK)
        delta = M[:, i[part]] - M[:, j[part]]
        delta_bar[part] = delta.mean(axis=0)
        var_delta[part] = np.mean((delta - delta_bar[part]) ** 2, axis=0)
    G = predict_matrix(forest, A, n_jobs)

    return VarianceDecomposition(
        pairs=np.column_stack([i, j]),
        forest_distance=G[i, j],
        plug_in=0.5 * delta_bar * delta_bar,
        tree_variance=0.5 * var_delta,
    )


def tree_variance_term(forest: SmerfForest, X_test: Any, n_jobs: int | None = None) -> float:
    """
    Average over test pairs of half the across-tree variance of delta_b.

    This estimates the noise variance sigma^2 for a consistent forest.
    """
    return float(variance_decomposition(forest, X_test, n_jobs).tree_variance.mean())
