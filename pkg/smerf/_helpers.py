"""Internal helper functions for smerf."""

from __future__ import annotations
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

import numpy as np
from joblib import Parallel, delayed

from .errors import IndexOutOfRangeError, ValidationError
from .utils import resolve_workers

T = TypeVar("T")
R = TypeVar("R")

CSV_FORMAT = "%.17g"


def as_indices(values: Any, n: int | None = None) -> np.ndarray:
    """
    Coerce an index list to a 1-D intp array.

    Args:
        values: Sequence of integer indices
        n: Optional exclusive upper bound

    Returns:
        1-D intp array

    Raises:
        ValidationError: If values are not integral
        IndexOutOfRangeError: If an index falls outside [0, n)
    """
    arr = np.asarray(values)
    if arr.size == 0:
        return np.empty(0, dtype=np.intp)
    if not np.issubdtype(arr.dtype, np.integer):
        as_float = arr.astype(np.float64)
        if not np.array_equal(np.rint(as_float), as_float):
            raise ValidationError("Indices must be integers")
    arr = arr.astype(np.intp).ravel()
    if n is not None and (arr.min() < 0 or arr.max() >= n):
        raise IndexOutOfRangeError(f"Index outside [0, {n}): {int(arr.min())}..{int(arr.max())}")
    return arr


def _has_header(path: Path, delimiter: str) -> bool:
    with path.open() as fh:
        first = fh.readline().strip()
    if not first:
        return False
    try:
        [float(tok) for tok in first.split(delimiter)]
    except ValueError:
        return True
    return False


def load_matrix(file_path: str | Path, delimiter: str = ",") -> np.ndarray:
    """
    Load a numeric CSV as a 2-D float array.

    A first line that does not parse as numbers is treated as a header.

    Raises:
        ValidationError: If the file is missing or not numeric
    """
    path = Path(file_path)
    if not path.is_file():
        raise ValidationError(f"File not found: {file_path}")
    try:
        skip = 1 if _has_header(path, delimiter) else 0
        return np.loadtxt(path, delimiter=delimiter, skiprows=skip, ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"Could not parse {file_path}: {e}")


def load_vector(file_path: str | Path, delimiter: str = ",") -> np.ndarray:
    """Load a one-column (or one-row) CSV as a 1-D array."""
    values = load_matrix(file_path, delimiter)
    if values.shape[1] != 1 and values.shape[0] != 1:
        raise ValidationError(f"{file_path} holds a {values.shape} table, expected one column")
    return values.ravel()


def save_matrix(
    file_path: str | Path,
    values: Any,
    header: Iterable[str] | None = None,
    delimiter: str = ",",
) -> Path:
    """Write a numeric table with round-trip precision."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    np.savetxt(
        path,
        arr,
        fmt=CSV_FORMAT,
        delimiter=delimiter,
        header=delimiter.join(header) if header else "",
        comments="",
    )
    return path


def save_table(file_path: str | Path, rows: list[dict[str, Any]], delimiter: str = ",") -> Path:
    """Write dict rows (shared keys, first row's order) as a CSV table."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return path
    columns = list(rows[0])
    lines = [delimiter.join(columns)]
    for row in rows:
        cells = []
        for key in columns:
            value = row.get(key)
            if value is None:
                cells.append("")
                continue
            cells.append(format(value, ".17g") if isinstance(value, float) else str(value))
        lines.append(delimiter.join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_edge_list(file_path: str | Path, num_nodes: int | None = None) -> np.ndarray:
    """
    Load an undirected edge list with ``source,target`` rows.

    Args:
        file_path: CSV path, optional header
        num_nodes: If given, node ids must lie in [0, num_nodes)

    Returns:
        int array of shape (m, 2)
    """
    edges = load_matrix(file_path)
    if edges.size == 0:
        return np.empty((0, 2), dtype=np.intp)
    if edges.shape[1] < 2:
        raise ValidationError(f"{file_path}: edge list needs source and target columns")
    return as_indices(edges[:, :2], num_nodes).reshape(-1, 2)


def adjacency_from_edges(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix for an undirected edge list."""
    adjacency = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    if len(edges):
        edges = as_indices(edges, num_nodes).reshape(-1, 2)
        adjacency[edges[:, 0], edges[:, 1]] = 1.0
        adjacency[edges[:, 1], edges[:, 0]] = 1.0
    return adjacency


def parallel_map(func: Callable[[T], R], items: Iterable[T], n_jobs: int | None = None) -> list[R]:
    """
    Apply ``func`` to every item on a thread pool, keeping input order.

    Args:
        func: Pure function of one item
        items: Work items
        n_jobs: Requested workers (capped by SMERF_THREADS)

    Returns:
        Results in the order of ``items``
    """
    items = list(items)
    workers = min(resolve_workers(n_jobs), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=workers, prefer="threads")(delayed(func)(item) for item in items)
