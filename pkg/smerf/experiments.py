"""Experiment drivers behind the link-prediction, theory and benchmark commands."""

from __future__ import annotations
import logging
from typing import Any, Iterable

import numpy as np

from .core import as_feature_matrix, substream
from .errors import ForestError, MetricError, ValidationError
from .forest import (
    SmerfForest,
    best_entry,
    default_grid,
    predict_cross,
    predict_matrix,
    train_forest,
    tune,
    variance_decomposition,
)
from .impurity import VarianceCriterion
from .metrics import evaluate_distances, evaluate_links
from .simdata import bayes_distance_matrix, gen_additive_theory, generate
from .types import EvalReport, FeatureMatrix, Hyperparams

_logger = logging.getLogger(__name__)

# Spawn-key roots for seeds derived inside experiments.
SPLIT_KEY = 1
TREE_KEY = 2
TRAIN_DATA_KEY = 3
TEST_DATA_KEY = 4


def child_seed(seed: int, *key: int) -> int:
    """Deterministic 63-bit seed for one experiment cell."""
    return int(substream(seed, *key).integers(2**63))


def summarize(rows: list[dict[str, Any]], by: list[str], metrics: list[str]) -> list[dict[str, Any]]:
    """
    Mean, standard deviation and standard error of metrics per group.

    NaN or missing entries (skipped replicates or metrics) are ignored;
    ``{name}_n`` counts the values each metric was summarized over and
    ``replicates`` counts the rows in the group.
    """
    groups: dict[tuple, list[dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in by), []).append(row)

    summary = []
    for key, members in groups.items():
        out: dict[str, Any] = dict(zip(by, key))
        out["replicates"] = len(members)
        for name in metrics:
            values = np.array([m.get(name, np.nan) for m in members], dtype=np.float64)
            values = values[~np.isnan(values)]
            count = values.size
            std = float(values.std(ddof=1)) if count > 1 else 0.0
            out[f"{name}_mean"] = float(values.mean()) if count else float("nan")
            out[f"{name}_std"] = std
            out[f"{name}_sem"] = std / np.sqrt(count) if count else float("nan")
            out[f"{name}_n"] = int(count)
        summary.append(out)
    return summary


# ========== Link prediction ==========

def split_nodes(n: int, train_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Node-wise train/test split.

    Raises:
        ValidationError: If either side would hold fewer than 2 nodes
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"Training proportion must lie in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise ValidationError(f"Split of {n} nodes at {train_fraction} leaves fewer than 2 on a side")
    order = rng.permutation(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def _score_links(
    forest: SmerfForest,
    adjacency: np.ndarray,
    features: FeatureMatrix,
    train: np.ndarray,
    test: np.ndarray,
    include_cross_pairs: bool,
    n_jobs: int | None,
) -> EvalReport:
    X_test = features.rows(test)
    iu = np.triu_indices(test.size, k=1)
    scores = [1.0 - predict_matrix(forest, X_test, n_jobs)[iu]]
    labels = [adjacency[np.ix_(test, test)][iu]]
    if include_cross_pairs:
        scores.append(1.0 - predict_cross(forest, X_test, features.rows(train), n_jobs).ravel())
        labels.append(adjacency[np.ix_(test, train)].ravel())
    return evaluate_links(np.concatenate(scores), np.concatenate(labels))


def select_link_settings(
    X_train: FeatureMatrix,
    Z: np.ndarray,
    hp: Hyperparams,
    n_jobs: int | None = None,
) -> dict[str, Hyperparams]:
    """
    Pick d and min_parent separately for AUC-ROC and AUC-PR by OOB score.

    The network grid (no d = p^(3/2)) is trained once; each AUC then selects
    its own entry from the same OOB reports. When the training nodes give no
    usable OOB AUC the untuned ``hp`` is kept for both.
    """
    grid = default_grid(X_train.p, hp, network=True)
    try:
        best_roc, reports = tune(X_train, Z, grid, criterion="auc_roc", n_jobs=n_jobs)
        best_pr = grid[best_entry(reports, "auc_pr")]
    except (ValidationError, ForestError) as e:
        _logger.warning(f"OOB tuning unavailable, keeping d={hp.d} min_parent={hp.min_parent}: {e.message}")
        return {"auc_roc": hp, "auc_pr": hp}
    return {"auc_roc": best_roc, "auc_pr": best_pr}


def linkpred_replicate(
    adjacency: np.ndarray,
    attributes: Any,
    train_fraction: float,
    hp: Hyperparams,
    seed: int,
    zero_diagonal: bool = False,
    include_cross_pairs: bool = False,
    n_jobs: int | None = None,
    tune_first: bool = False,
) -> EvalReport:
    """
    Train on the training nodes' Z = 1 - A and score held-out pairs.

    Link score is 1 - predicted distance. Pairs among test nodes are always
    scored; test-train pairs only with ``include_cross_pairs``. With
    ``tune_first`` each AUC is scored by the forest its own OOB AUC selected,
    and the chosen entries are returned in ``report.settings``.
    """
    features = as_feature_matrix(attributes)
    n = adjacency.shape[0]
    if features.n != n:
        raise ValidationError(f"{features.n} attribute rows for {n} nodes")
    train, test = split_nodes(n, train_fraction, substream(seed, SPLIT_KEY))
    _logger.debug(
        f"Split {n} nodes: {train.size} train ({train.size * (train.size - 1) // 2} node pairs), "
        f"{test.size} test"
    )

    Z = 1.0 - adjacency[np.ix_(train, train)]
    if zero_diagonal:
        np.fill_diagonal(Z, 0.0)
    X_train = features.rows(train)
    base = hp.updated(seed=child_seed(seed, TREE_KEY))
    settings = select_link_settings(X_train, Z, base, n_jobs) if tune_first else {"auc_roc": base, "auc_pr": base}

    roc_report = _score_links(
        train_forest(X_train, Z, settings["auc_roc"], n_jobs),
        adjacency, features, train, test, include_cross_pairs, n_jobs,
    )
    report = EvalReport(metrics={"auc_roc": roc_report["auc_roc"]}, n_pairs=roc_report.n_pairs)
    if settings["auc_pr"] == settings["auc_roc"]:
        report.metrics["auc_pr"] = roc_report["auc_pr"]
    else:
        pr_report = _score_links(
            train_forest(X_train, Z, settings["auc_pr"], n_jobs),
            adjacency, features, train, test, include_cross_pairs, n_jobs,
        )
        report.metrics["auc_pr"] = pr_report["auc_pr"]

    report.n_points = int(test.size)
    if tune_first:
        report.settings = dict(settings)
    return report


def run_linkpred(
    adjacency: np.ndarray,
    attributes: np.ndarray,
    train_fractions: Iterable[float],
    replicates: int,
    hp: Hyperparams,
    seed: int,
    zero_diagonal: bool = False,
    include_cross_pairs: bool = False,
    n_jobs: int | None = None,
    tune_first: bool = False,
) -> list[dict[str, Any]]:
    """
    One row per (training proportion, replicate).

    Tuned runs add the selected ``d`` and ``min_parent`` for each AUC.
    """
    features = as_feature_matrix(attributes)
    rows = []
    for t_index, fraction in enumerate(train_fractions):
        for r in range(replicates):
            cell_seed = child_seed(seed, SPLIT_KEY, t_index, r)
            row: dict[str, Any] = {"train_proportion": fraction, "replicate": r}
            settings: dict[str, Hyperparams] = {}
            try:
                report = linkpred_replicate(
                    adjacency, features, fraction, hp, cell_seed,
                    zero_diagonal, include_cross_pairs, n_jobs, tune_first,
                )
                roc, pr, pairs = report["auc_roc"], report["auc_pr"], report.n_pairs
                settings = report.settings
            except MetricError as e:
                _logger.warning(f"TP={fraction} replicate {r} skipped: {e.message}")
                roc = pr = float("nan")
                pairs = 0
            row.update({"auc_roc": roc, "auc_pr": pr, "n_pairs": pairs})
            if tune_first:
                for metric, suffix in (("auc_roc", "roc"), ("auc_pr", "pr")):
                    chosen = settings.get(metric)
                    row[f"d_{suffix}"] = chosen.d if chosen else None
                    row[f"min_parent_{suffix}"] = chosen.min_parent if chosen else None
            rows.append(row)
            _logger.info(f"TP={fraction} replicate {r}: AUC-ROC {roc:.4f}, AUC-PR {pr:.4f}")
    return rows


# ========== Theory check ==========

def theory_check_cell(
    n: int,
    hp: Hyperparams,
    test_points: int,
    seed: int,
    engine: str = "variance",
    n_jobs: int | None = None,
) -> dict[str, float]:
    """
    Tree-variance term of a fully grown forest on the additive model.

    ``engine="variance"`` grows trees with the variance objective on y,
    which yields the same trees as the pairwise objective on
    z = (y_i - y_j)^2 / 2 at a fraction of the cost.
    """
    train = gen_additive_theory(n, child_seed(seed, TRAIN_DATA_KEY))
    test = gen_additive_theory(test_points, child_seed(seed, TEST_DATA_KEY))
    criterion = VarianceCriterion(train.y) if engine == "variance" else None
    forest = train_forest(train.X, train.Z, hp, n_jobs, responses=train.y, criterion=criterion)

    parts = variance_decomposition(forest, test.X, n_jobs).summary()
    iu = np.triu_indices(test_points, k=1)
    return {
        "s_n": parts["tree_variance"],
        "plug_in": parts["plug_in"],
        "forest_distance": parts["forest_distance"],
        "bayes_distance": float(bayes_distance_matrix("theory", test.X.values)[iu].mean()),
    }


def run_theory_check(
    sizes: Iterable[int],
    replicates: int,
    hp: Hyperparams,
    test_points: int,
    seed: int,
    engine: str = "variance",
    n_jobs: int | None = None,
) -> list[dict[str, Any]]:
    """One row per (n, replicate) with the decomposition averages."""
    if not hp.fully_grown:
        raise ValidationError("Theory check needs fully grown trees (min_parent=2, no depth limit)")
    rows = []
    for n in sizes:
        for r in range(replicates):
            cell_seed = child_seed(seed, n, r)
            cell = theory_check_cell(n, hp.updated(seed=child_seed(cell_seed, TREE_KEY)), test_points, cell_seed, engine, n_jobs)
            rows.append({"n": n, "replicate": r, **cell})
            _logger.info(f"n={n} replicate {r}: s_n={cell['s_n']:.5f}")
    return rows


# ========== Simulation benchmark ==========

def simbench_cell(
    family: str,
    n: int,
    hp: Hyperparams,
    test_points: int,
    seed: int,
    tune_first: bool = False,
    n_jobs: int | None = None,
) -> dict[str, float]:
    """Train on n points of a family and score 200 (by default) fresh points."""
    train = generate(family, n, child_seed(seed, TRAIN_DATA_KEY))
    test = generate(family, test_points, child_seed(seed, TEST_DATA_KEY))
    if tune_first:
        hp, _ = tune(train.X, train.Z, default_grid(train.X.p, hp), n_jobs=n_jobs)
    forest = train_forest(train.X, train.Z, hp, n_jobs)
    report = evaluate_distances(predict_matrix(forest, test.X, n_jobs), test.Z.values)
    return dict(report.metrics)


def run_simbench(
    families: Iterable[str],
    sizes: Iterable[int],
    replicates: int,
    hp: Hyperparams,
    test_points: int,
    seed: int,
    tune_first: bool = False,
    n_jobs: int | None = None,
) -> list[dict[str, Any]]:
    """One row per (family, n, replicate) with mAP-10, Spearman and RMSE."""
    rows = []
    for f_index, family in enumerate(families):
        for n in sizes:
            for r in range(replicates):
                cell_seed = child_seed(seed, f_index, n, r)
                cell_hp = hp.updated(seed=child_seed(cell_seed, TREE_KEY))
                metrics = simbench_cell(family, n, cell_hp, test_points, cell_seed, tune_first, n_jobs)
                rows.append({"family": family, "n": n, "replicate": r, **metrics})
                _logger.info(f"{family} n={n} replicate {r}: {metrics}")
    return rows
