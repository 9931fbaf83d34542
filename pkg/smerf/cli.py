"""
Command-line entry point: ``smerf <command> [options]``.

Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from ._helpers import (
    adjacency_from_edges,
    load_edge_list,
    load_matrix,
    load_vector,
    save_matrix,
    save_table,
)
from .core import validate_distance_matrix
from .errors import NoCoveredPairsError, SmerfError, UsageError, ValidationError
from .experiments import run_linkpred, run_simbench, run_theory_check, summarize
from .forest import best_entry, default_grid, oob_rmse, predict_cross, predict_matrix, train_forest, tune
from .importance import feature_importance
from .metrics import evaluate_distances
from .model_file import load_forest, save_forest
from .reductions import absolute_distance, indicator_distance, squared_half_distance
from .simdata import FAMILIES, gen_sbm_network, generate
from .types import Hyperparams, LabeledData, RunConfig
from .utils import __version__, setup_logging

_logger = logging.getLogger(__name__)

MODES = {"rf": "axis", "binary": "binary"}
REDUCTIONS = ("class", "reg", "abs")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args: Any, **kwargs: Any) -> None:
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


# ========== Argument groups ==========

def _add_forest_args(parser: argparse.ArgumentParser, trees: int = 500) -> None:
    group = parser.add_argument_group("forest")
    group.add_argument("--trees", type=int, default=trees, help="number of trees B")
    group.add_argument("--d", type=int, default=None, help="candidate projections per node (default round(sqrt(p)))")
    group.add_argument("--min-parent", type=int, default=2, help="smallest node that is still split")
    group.add_argument("--max-depth", type=int, default=None)
    group.add_argument("--mode", choices=sorted(MODES), default="rf", help="rf = axis-aligned, binary = sparse oblique")
    group.add_argument("--nonzeros", type=float, default=2.0, help="mean nonzeros per sparse-binary projection")
    group.add_argument("--sampling", choices=("bootstrap", "subsample"), default="bootstrap")
    group.add_argument("--subsample-size", type=float, default=None, help="fraction in (0,1) or a count")


def _add_training_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--features", type=Path, required=True)
    parser.add_argument("--dist", type=Path)
    parser.add_argument("--labels", type=Path)
    parser.add_argument("--reduction", choices=REDUCTIONS)


def _hyperparams(args: argparse.Namespace, **overrides: Any) -> Hyperparams:
    size = args.subsample_size
    if size is not None and size >= 1 and float(size).is_integer():
        size = int(size)
    fields = {
        "num_trees": args.trees,
        "d": args.d,
        "min_parent": args.min_parent,
        "max_depth": args.max_depth,
        "projection_mode": MODES[args.mode],
        "nonzeros": args.nonzeros,
        "sampling": args.sampling,
        "subsample_size": size,
        "seed": args.seed,
    }
    fields.update(overrides)
    try:
        return Hyperparams.build(**fields)
    except ValidationError as e:
        raise UsageError(e.message, details=e.details) from e


def _config(args: argparse.Namespace, **inputs: Path | None) -> RunConfig:
    try:
        config = RunConfig(
            command=args.command,
            inputs={name: path for name, path in inputs.items() if path is not None},
            out=getattr(args, "out", None),
            seed=args.seed,
            replicates=getattr(args, "replicates", 1),
            n_jobs=args.threads,
        )
    except PydanticValidationError as e:
        raise UsageError(f"Invalid run configuration: {e.errors(include_url=False)[0]['msg']}") from e
    config.check_inputs()
    return config


def _training_data(args: argparse.Namespace) -> tuple[np.ndarray, Any, np.ndarray | None]:
    """Features, distance matrix and (regression reduction only) responses."""
    if (args.dist is None) == (args.labels is None):
        raise UsageError("Give exactly one of --dist or --labels")
    if args.labels is not None and args.reduction is None:
        raise UsageError("--labels needs --reduction {class|reg|abs}")

    X = load_matrix(args.features)
    if args.dist is not None:
        return X, validate_distance_matrix(load_matrix(args.dist)), None

    values = load_vector(args.labels)
    if args.reduction == "class":
        return X, indicator_distance(LabeledData(labels=values)), None
    labeled = LabeledData(responses=values)
    if args.reduction == "reg":
        return X, squared_half_distance(labeled), labeled.values
    return X, absolute_distance(labeled), None


# ========== Commands ==========

def cmd_simulate(args: argparse.Namespace) -> int:
    _config(args)
    out = Path(args.out)
    if args.family == "sbm":
        adjacency, attributes = gen_sbm_network(
            args.n, args.blocks, args.p_in, args.p_out, args.attr_noise, args.seed
        )
        header = [f"a{k + 1}" for k in range(attributes.shape[1])]
        save_matrix(out / "features.csv", attributes, header=header)
        i, j = np.nonzero(np.triu(adjacency, k=1))
        save_matrix(out / "edges.csv", np.column_stack([i, j]), header=["source", "target"])
        save_matrix(out / "dist.csv", 1.0 - adjacency)
        print(f"Simulated SBM network: {args.n} nodes, {i.size} edges -> {out}")
        return 0

    kwargs = {"p": args.p} if args.family == "theory" and args.p else {}
    data = generate(args.family, args.n, args.seed, **kwargs)
    header = [f"x{k + 1}" for k in range(data.X.p)]
    save_matrix(out / "features.csv", data.X.values, header=header)
    save_matrix(out / "dist.csv", data.Z.values)
    if data.Q is not None:
        save_matrix(out / "sim.csv", data.Q)
    if data.y is not None:
        save_matrix(out / "responses.csv", data.y, header=["y"])
    print(f"Simulated {data!r} -> {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    _config(args, features=args.features, dist=args.dist, labels=args.labels)
    X, Z, responses = _training_data(args)
    hp = _hyperparams(args)
    forest = train_forest(X, Z, hp, args.threads, responses=responses)
    save_forest(forest, args.out)

    try:
        report = oob_rmse(forest, X, Z, args.threads)
        print(report)
    except NoCoveredPairsError as e:
        _logger.warning(e.message)
        print("OOB report unavailable: no out-of-bag pairs")
    print(f"Model written to {args.out}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    _config(args, features=args.features, dist=args.dist, labels=args.labels)
    X, Z, _ = _training_data(args)
    base = _hyperparams(args)
    grid = default_grid(X.shape[1], base, network=args.network)
    best, reports = tune(X, Z, grid, seed=args.seed, criterion=args.criterion, n_jobs=args.threads)

    chosen = best_entry(reports, args.criterion)
    rows = [
        {"index": k, "d": hp.d, "min_parent": hp.min_parent, **report.to_dict(), "selected": int(k == chosen)}
        for k, (hp, report) in enumerate(zip(grid, reports))
    ]
    save_table(args.out, rows)
    print(f"Selected d={best.d}, min_parent={best.min_parent} ({len(grid)} grid points) -> {args.out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    _config(args, model=args.model, features=args.features, against=args.against)
    forest = load_forest(args.model)
    X = load_matrix(args.features)
    if args.against is not None:
        pred = predict_cross(forest, X, load_matrix(args.against), args.threads)
    else:
        pred = predict_matrix(forest, X, args.threads)
    save_matrix(args.out, pred)
    print(f"Predicted {pred.shape[0]}x{pred.shape[1]} distances -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    _config(args, pred=args.pred, truth=args.truth)
    report = evaluate_distances(load_matrix(args.pred), load_matrix(args.truth))
    save_table(args.out, [report.to_dict()])
    print(report)
    return 0


def cmd_importance(args: argparse.Namespace) -> int:
    _config(args, model=args.model)
    importance = feature_importance(load_forest(args.model), args.threads)
    rows = [
        {"feature": k + 1, "raw": float(importance.raw[k]), "normalized": float(importance.normalized[k])}
        for k in range(importance.raw.size)
    ]
    save_table(args.out, rows)
    top = ", ".join(str(k + 1) for k in importance.ranking()[:5])
    print(f"Most important features: {top} -> {args.out}")
    return 0


def cmd_linkpred(args: argparse.Namespace) -> int:
    _config(args, edges=args.edges, attributes=args.attributes)
    attributes = load_matrix(args.attributes)
    n = attributes.shape[0]
    adjacency = adjacency_from_edges(load_edge_list(args.edges, n), n)
    _logger.info(f"Network: {n} nodes, {(n * n - n) // 2} node pairs, {int(adjacency.sum() // 2)} links")

    hp = _hyperparams(args)
    rows = run_linkpred(
        adjacency, attributes, args.train_proportions, args.replicates, hp, args.seed,
        args.zero_diagonal, args.include_cross_pairs, args.threads, args.tune,
    )
    summary = summarize(rows, ["train_proportion"], ["auc_roc", "auc_pr"])
    out = Path(args.out)
    save_table(out / "linkpred_replicates.csv", rows)
    save_table(out / "linkpred_summary.csv", summary)
    for row in summary:
        print(
            f"TP={row['train_proportion']}: AUC-ROC {row['auc_roc_mean']:.4f} +- {row['auc_roc_std']:.4f}, "
            f"AUC-PR {row['auc_pr_mean']:.4f} +- {row['auc_pr_std']:.4f}"
        )
    return 0


def cmd_theory_check(args: argparse.Namespace) -> int:
    _config(args)
    hp = _hyperparams(args, min_parent=2, max_depth=None)
    sizes = [2**e for e in range(args.min_exp, args.max_exp + 1)]
    rows = run_theory_check(sizes, args.replicates, hp, args.test_points, args.seed, args.engine, args.threads)
    summary = summarize(rows, ["n"], ["s_n", "plug_in", "forest_distance", "bayes_distance"])
    out = Path(args.out)
    save_table(out / "theory_replicates.csv", rows)
    save_table(out / "theory_summary.csv", summary)
    for row in summary:
        print(f"n={row['n']}: s_n {row['s_n_mean']:.5f} (target 0.01)")
    return 0


def cmd_simbench(args: argparse.Namespace) -> int:
    _config(args)
    hp = _hyperparams(args)
    rows = run_simbench(
        args.families, args.sizes, args.replicates, hp, args.test_points, args.seed, args.tune, args.threads
    )
    metrics = [m for m in ("map10", "spearman", "rmse") if all(m in row for row in rows)]
    summary = summarize(rows, ["family", "n"], metrics)
    out = Path(args.out)
    save_table(out / "simbench_replicates.csv", rows)
    save_table(out / "simbench_summary.csv", summary)
    for row in summary:
        values = ", ".join(f"{m} {row[f'{m}_mean']:.4f}" for m in metrics)
        print(f"{row['family']} n={row['n']}: {values}")
    return 0


# ========== Parser ==========

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    common.add_argument("--threads", type=int, default=None, help="worker threads (capped by SMERF_THREADS)")
    common.add_argument("--seed", type=int, default=0, help="master seed")

    parser = _Parser(prog="smerf", description="Distance-learning random forests")
    parser.add_argument("--version", action="version", version=f"smerf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="generate a simulated data set")
    p.add_argument("--family", choices=(*FAMILIES, "sbm"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=None, help="feature dimension for the theory family")
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.5)
    p.add_argument("--p-out", type=float, default=0.05)
    p.add_argument("--attr-noise", type=float, default=0.1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="train a forest and write a model file")
    _add_training_data_args(p)
    _add_forest_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("tune", parents=[common], help="out-of-bag grid search over d and min_parent")
    _add_training_data_args(p)
    _add_forest_args(p)
    p.add_argument("--network", action="store_true", help="drop d = p^(3/2) from the grid")
    p.add_argument("--criterion", choices=("rmse", "auc_roc", "auc_pr"), default="rmse")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("predict", parents=[common], help="predict pairwise distances")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--against", type=Path, default=None, help="second feature file for cross distances")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="mAP-10, Spearman and RMSE of predicted distances")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("importance", parents=[common], help="split-gain feature importance")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_importance)

    p = sub.add_parser("linkpred", parents=[common], help="link prediction with Z = 1 - A")
    p.add_argument("--edges", type=Path, required=True)
    p.add_argument("--attributes", type=Path, required=True)
    p.add_argument("--train-proportions", type=_csv_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--zero-diagonal", action="store_true", help="force z_ii = 0")
    p.add_argument("--include-cross-pairs", action="store_true", help="also score test-train pairs")
    p.add_argument("--tune", action="store_true", help="select d and min_parent per AUC by OOB score first")
    _add_forest_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_linkpred)

    p = sub.add_parser("theory-check", parents=[common], help="tree-variance term versus n on the additive model")
    p.add_argument("--min-exp", type=int, default=4)
    p.add_argument("--max-exp", type=int, default=12)
    p.add_argument("--test-points", type=int, default=200)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--engine", choices=("variance", "pairwise"), default="variance")
    _add_forest_args(p, trees=1000)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_theory_check)

    p = sub.add_parser("simbench", parents=[common], help="learning curves on the simulated families")
    p.add_argument("--families", type=lambda s: [f for f in s.split(",") if f], default=["regression", "bilinear", "radial"])
    p.add_argument("--sizes", type=_csv_ints, default=[20, 80, 320])
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--test-points", type=int, default=200)
    p.add_argument("--tune", action="store_true", help="select d and min_parent by OOB RMSE first")
    _add_forest_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_simbench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run one command.

    Returns:
        Process exit status
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)

    try:
        return args.handler(args)
    except SmerfError as e:
        _logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        _logger.debug("Internal error", exc_info=True)
        print(f"internal error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
