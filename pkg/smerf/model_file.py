"""
Versioned binary model file.

Layout (all integers little-endian):

    magic        8 bytes  b"SMERFMDL"
    version      uint32
    header_len   uint64
    header       UTF-8 JSON, sorted keys: hyperparams, n, p, num_trees,
                 z_sha256, has_responses, arrays [{name, dtype, shape}]
    arrays       raw little-endian buffers in header order

Trees are flattened into node-, projection-, member- and bag-arrays with
offset tables, so a forest serializes to the same bytes however many
threads trained it.
"""

from __future__ import annotations
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ModelFormatError, ValidationError
from .forest import SmerfForest
from .tree import SmerfTree, TreeNode
from .types import DistanceMatrix, Hyperparams, SparseProjection, SplitParams

_logger = logging.getLogger(__name__)

MAGIC = b"SMERFMDL"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")

_MODES = ("axis", "binary")


def z_digest(Z: DistanceMatrix) -> str:
    """SHA-256 of Z's little-endian float64 bytes."""
    return hashlib.sha256(np.ascontiguousarray(Z.values, dtype="<f8").tobytes()).hexdigest()


def _offsets(lengths: list[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(lengths, dtype=np.int64)]).astype(np.int64)


def _flatten(forest: SmerfForest) -> dict[str, np.ndarray]:
    nodes = [node for tree in forest.trees for node in tree.nodes]
    projections = [node.split.projection if node.split else None for node in nodes]
    members = [node.members if node.is_leaf else np.empty(0, dtype=np.intp) for node in nodes]

    def column(getter: Any, dtype: str) -> np.ndarray:
        return np.array([getter(node) for node in nodes], dtype=dtype)

    return {
        "tree_offsets": _offsets([len(tree.nodes) for tree in forest.trees]),
        "depth": column(lambda nd: nd.depth, "<i8"),
        "n_samples": column(lambda nd: nd.n_samples, "<i8"),
        "left": column(lambda nd: -1 if nd.is_leaf else nd.left, "<i8"),
        "right": column(lambda nd: -1 if nd.is_leaf else nd.right, "<i8"),
        "leaf_id": column(lambda nd: -1 if nd.leaf_id is None else nd.leaf_id, "<i8"),
        "threshold": column(lambda nd: nd.split.threshold if nd.split else 0.0, "<f8"),
        "gain": column(lambda nd: nd.gain, "<f8"),
        "mode": np.array([_MODES.index(pr.mode) if pr else -1 for pr in projections], dtype="<i8"),
        "proj_offsets": _offsets([len(pr.features) if pr else 0 for pr in projections]),
        "proj_features": np.array(
            [f for pr in projections if pr for f in pr.features], dtype="<i8"
        ),
        "proj_weights": np.array(
            [w for pr in projections if pr for w in pr.weights], dtype="<i8"
        ),
        "member_offsets": _offsets([m.size for m in members]),
        "members": np.concatenate(members).astype("<i8") if members else np.empty(0, "<i8"),
        "bag_offsets": _offsets([tree.bag.size for tree in forest.trees]),
        "bags": np.concatenate([tree.bag for tree in forest.trees]).astype("<i8"),
        "train_Z": np.ascontiguousarray(forest.train_Z.values, dtype="<f8"),
    }


def save_forest(forest: SmerfForest, file_path: str | Path) -> Path:
    """
    Write a forest, its training Z and (if present) latent responses.

    Args:
        forest: Trained forest
        file_path: Output path

    Returns:
        The written path
    """
    arrays = _flatten(forest)
    if forest.responses is not None:
        arrays["responses"] = np.ascontiguousarray(forest.responses, dtype="<f8")

    header = {
        "format_version": FORMAT_VERSION,
        "hyperparams": forest.hp.model_dump(),
        "n": forest.n,
        "p": forest.p,
        "num_trees": forest.num_trees,
        "z_sha256": z_digest(forest.train_Z),
        "has_responses": forest.responses is not None,
        "arrays": [
            {"name": name, "dtype": values.dtype.str, "shape": list(values.shape)}
            for name, values in arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for values in arrays.values():
            fh.write(values.tobytes())

    _logger.info(f"Saved {forest.num_trees}-tree model to {path}")
    return path


def _read_arrays(blob: bytes, offset: int, specs: list[dict[str, Any]]) -> dict[str, np.ndarray]:
    arrays = {}
    for spec in specs:
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        size = count * dtype.itemsize
        if offset + size > len(blob):
            raise ModelFormatError(f"Model file truncated in array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += size
    if offset != len(blob):
        raise ModelFormatError(f"{len(blob) - offset} trailing bytes after model arrays")
    return arrays


_NODE_ARRAYS = ("depth", "n_samples", "left", "right", "leaf_id", "threshold", "gain", "mode")


def _check_offsets(name: str, offsets: np.ndarray, entries: int, total: int) -> None:
    if offsets.shape != (entries + 1,):
        raise ModelFormatError(f"{name} has {offsets.size} entries, expected {entries + 1}")
    if offsets[0] != 0 or offsets[-1] != total or np.any(np.diff(offsets) < 0):
        raise ModelFormatError(f"{name} is not a non-decreasing table from 0 to {total}")


def _check_layout(arrays: dict[str, np.ndarray], num_trees: int, n: int) -> None:
    """Shape and range checks shared by every tree."""
    tree_offsets = arrays["tree_offsets"]
    if tree_offsets.shape != (num_trees + 1,):
        raise ModelFormatError(f"tree_offsets has {tree_offsets.size} entries for {num_trees} trees")
    num_nodes = int(tree_offsets[-1])
    _check_offsets("tree_offsets", tree_offsets, num_trees, num_nodes)
    if np.any(np.diff(tree_offsets) == 0):
        raise ModelFormatError("A tree has no nodes")
    for name in _NODE_ARRAYS:
        if arrays[name].shape != (num_nodes,):
            raise ModelFormatError(f"{name} has shape {arrays[name].shape}, expected ({num_nodes},)")

    _check_offsets("proj_offsets", arrays["proj_offsets"], num_nodes, arrays["proj_features"].size)
    _check_offsets("member_offsets", arrays["member_offsets"], num_nodes, arrays["members"].size)
    _check_offsets("bag_offsets", arrays["bag_offsets"], num_trees, arrays["bags"].size)
    if arrays["proj_weights"].shape != arrays["proj_features"].shape:
        raise ModelFormatError("Projection features and weights differ in length")
    for name in ("members", "bags"):
        values = arrays[name]
        if values.size and (values.min() < 0 or values.max() >= n):
            raise ModelFormatError(f"{name} holds rows outside 0..{n - 1}")
    if arrays["train_Z"].shape != (n, n):
        raise ModelFormatError(f"train_Z has shape {arrays['train_Z'].shape}, expected ({n}, {n})")


def _rebuild_tree(arrays: dict[str, np.ndarray], start: int, stop: int, bag: np.ndarray, p: int) -> SmerfTree:
    size = stop - start
    nodes = []
    for k in range(start, stop):
        node = TreeNode(
            node_id=k - start,
            depth=int(arrays["depth"][k]),
            n_samples=int(arrays["n_samples"][k]),
            gain=float(arrays["gain"][k]),
        )
        if arrays["left"][k] < 0:
            lo, hi = arrays["member_offsets"][k], arrays["member_offsets"][k + 1]
            node.leaf_id = int(arrays["leaf_id"][k])
            node.members = arrays["members"][lo:hi].astype(np.intp)
            if node.members.size == 0:
                raise ModelFormatError(f"Leaf node {k - start} has no members")
        else:
            left, right = int(arrays["left"][k]), int(arrays["right"][k])
            if not (k - start < left < size and k - start < right < size):
                raise ModelFormatError(f"Node {k - start} has children ({left}, {right}) outside its tree of {size}")
            mode = int(arrays["mode"][k])
            if not 0 <= mode < len(_MODES):
                raise ModelFormatError(f"Node {k - start} has unknown projection mode {mode}")
            lo, hi = arrays["proj_offsets"][k], arrays["proj_offsets"][k + 1]
            projection = SparseProjection(
                features=tuple(int(f) for f in arrays["proj_features"][lo:hi]),
                weights=tuple(int(w) for w in arrays["proj_weights"][lo:hi]),
                mode=_MODES[mode],  # type: ignore[arg-type]
            )
            projection.check_dims(p)
            node.split = SplitParams(projection=projection, threshold=float(arrays["threshold"][k]))
            node.left = left
            node.right = right
        nodes.append(node)

    leaf_ids = sorted(node.leaf_id for node in nodes if node.is_leaf)  # type: ignore[type-var]
    if leaf_ids != list(range(len(leaf_ids))):
        raise ModelFormatError(f"Leaf ids of a {size}-node tree are not 0..{len(leaf_ids) - 1}")
    return SmerfTree(nodes=nodes, bag=bag, p=p)


def _decode(header: dict[str, Any], arrays: dict[str, np.ndarray]) -> SmerfForest:
    raw_Z = arrays["train_Z"]
    if hashlib.sha256(raw_Z.tobytes()).hexdigest() != header["z_sha256"]:
        raise ModelFormatError("Training distance matrix does not match its stored hash")

    n, p, num_trees = int(header["n"]), int(header["p"]), int(header["num_trees"])
    if n < 1 or p < 1 or num_trees < 1:
        raise ModelFormatError(f"Invalid model dimensions n={n}, p={p}, num_trees={num_trees}")
    _check_layout(arrays, num_trees, n)
    Z = DistanceMatrix(raw_Z.astype(np.float64))

    tree_offsets = arrays["tree_offsets"]
    bag_offsets = arrays["bag_offsets"]
    trees = [
        _rebuild_tree(
            arrays,
            int(tree_offsets[b]),
            int(tree_offsets[b + 1]),
            arrays["bags"][bag_offsets[b]:bag_offsets[b + 1]].astype(np.intp),
            p,
        )
        for b in range(num_trees)
    ]

    responses = None
    if header["has_responses"]:
        responses = arrays["responses"].astype(np.float64)
        if responses.shape != (n,):
            raise ModelFormatError(f"responses has shape {responses.shape}, expected ({n},)")
    return SmerfForest(
        trees=trees,
        hp=Hyperparams.build(**header["hyperparams"]),
        train_Z=Z,
        n=n,
        p=p,
        responses=responses,
    )


def load_forest(file_path: str | Path) -> SmerfForest:
    """
    Read a forest written by ``save_forest``.

    Every decoded index is checked against the tree, feature and row counts
    it refers to, so a damaged file fails here rather than at prediction.

    Raises:
        ModelFormatError: On a bad magic, unknown version, truncated data, a
            training-Z hash mismatch or an inconsistent tree structure
    """
    path = Path(file_path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise ModelFormatError(f"Cannot read model file {file_path}: {e}")

    if len(blob) < _PREFIX.size:
        raise ModelFormatError(f"{file_path} is too short to be a model file")
    magic, version, header_len = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"{file_path} is not a smerf model file")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"Unsupported model format version {version}")

    try:
        header = json.loads(blob[_PREFIX.size:_PREFIX.size + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"Corrupt model header: {e}")

    try:
        arrays = _read_arrays(blob, _PREFIX.size + header_len, header["arrays"])
        forest = _decode(header, arrays)
    except ModelFormatError:
        raise
    except (IndexError, KeyError, ValueError, TypeError, ValidationError) as e:
        raise ModelFormatError(f"Corrupt model structure in {file_path}: {e}")

    _logger.info(f"Loaded {forest}")
    return forest
