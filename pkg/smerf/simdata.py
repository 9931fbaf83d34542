"""
Simulated distance families, Bayes distance oracles and a synthetic network.

Every generator is a pure function of its seed.
"""

from __future__ import annotations
import logging
from typing import Any, Callable

import networkx as nx
import numpy as np

from .core import substream
from .errors import InvalidProbabilityError, UnknownFamilyError, ValidationError
from .types import DistanceMatrix, FeatureMatrix, SimulatedSet

_logger = logging.getLogger(__name__)

SIM_DIMS = 20
THEORY_DIMS = 2

REGRESSION_LOW, REGRESSION_HIGH = 0.1, 0.9
REGRESSION_NOISE = 0.1          # epsilon ~ U(-0.1, 0.1)
THEORY_NOISE_VAR = 0.01         # epsilon ~ N(0, 0.01)

# Keeps data streams apart from per-tree streams of the same seed.
DATA_STREAM = 2**31

FAMILIES = ("regression", "bilinear", "radial", "theory")


def _stream(seed: int, family: str) -> np.random.Generator:
    return substream(seed, DATA_STREAM, FAMILIES.index(family))


def _check_n(n: int) -> None:
    if n < 2:
        raise ValidationError(f"Pairwise data needs at least 2 points, got n={n}")


def _bounded_set(family: str, X: np.ndarray, Z: np.ndarray, y: np.ndarray | None, seed: int) -> SimulatedSet:
    Z = np.clip(Z, 0.0, 1.0)
    return SimulatedSet(
        family=family,
        X=FeatureMatrix(X),
        Z=DistanceMatrix(Z),
        Q=1.0 - Z,
        y=y,
        meta={"seed": seed},
    )


# ========== Mean functions ==========

def regression_mean(X: np.ndarray) -> np.ndarray:
    """m(x) = (x1 + x2) / 2."""
    X = np.atleast_2d(X)
    return 0.5 * (X[:, 0] + X[:, 1])


def radial_norm(X: np.ndarray) -> np.ndarray:
    """Euclidean norm of the first two coordinates."""
    X = np.atleast_2d(X)
    return np.hypot(X[:, 0], X[:, 1])


def theory_mean(X: np.ndarray) -> np.ndarray:
    """m(x) = x1^2 + x2^2."""
    X = np.atleast_2d(X)
    return X[:, 0] ** 2 + X[:, 1] ** 2


# ========== Families ==========

def gen_regression_distance(n: int, seed: int, noise: bool = True) -> SimulatedSet:
    """
    Squared difference of a noisy additive response.

    Features are i.i.d. U(0.1, 0.9) in 20 dimensions,
    y = (x1 + x2) / 2 + eps with eps ~ U(-0.1, 0.1), and z_ij = (y_i - y_j)^2.

    Args:
        n: Points (>= 2)
        seed: Generator seed
        noise: Draw eps; False sets eps = 0

    Returns:
        SimulatedSet with Q = 1 - Z and latent y
    """
    _check_n(n)
    rng = _stream(seed, "regression")
    X = rng.uniform(REGRESSION_LOW, REGRESSION_HIGH, size=(n, SIM_DIMS))
    eps = rng.uniform(-REGRESSION_NOISE, REGRESSION_NOISE, size=n)
    y = regression_mean(X) + (eps if noise else 0.0)
    diff = y[:, None] - y[None, :]
    return _bounded_set("regression", X, diff * diff, y, seed)


def gen_bilinear_distance(n: int, seed: int) -> SimulatedSet:
    """
    Product similarity q_ij = y_i * y_j with y = (x1 + x2) / 2 and Z = 1 - Q.

    Features are i.i.d. U(0, 1). The diagonal keeps z_ii = 1 - y_i^2.
    """
    _check_n(n)
    rng = _stream(seed, "bilinear")
    X = rng.uniform(0.0, 1.0, size=(n, SIM_DIMS))
    y = regression_mean(X)
    return _bounded_set("bilinear", X, 1.0 - np.outer(y, y), y, seed)


def sample_unit_ball(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the unit ball: Gaussian direction times U^(1/dims)."""
    directions = rng.standard_normal(size=(n, dims))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=n) ** (1.0 / dims)
    return directions * radii[:, None]


def gen_radial_distance(n: int, seed: int) -> SimulatedSet:
    """
    Squared difference of first-two-coordinate norms, points uniform in the
    20-dimensional unit ball.
    """
    _check_n(n)
    rng = _stream(seed, "radial")
    X = sample_unit_ball(n, SIM_DIMS, rng)
    r = radial_norm(X)
    diff = r[:, None] - r[None, :]
    return _bounded_set("radial", X, diff * diff, r, seed)


def gen_additive_theory(n: int, seed: int, p: int = THEORY_DIMS, noise: bool = True) -> SimulatedSet:
    """
    Additive model y = x1^2 + x2^2 + eps, eps ~ N(0, 0.01), with
    z_ij = (y_i - y_j)^2 / 2.

    Features are U(0, 1); columns beyond the first two are irrelevant.

    Args:
        n: Points (>= 2)
        seed: Generator seed
        p: Feature dimension (>= 2)
        noise: Draw eps; False sets eps = 0
    """
    _check_n(n)
    if p < THEORY_DIMS:
        raise ValidationError(f"The additive model needs p >= {THEORY_DIMS}, got {p}")
    rng = _stream(seed, "theory")
    X = rng.uniform(0.0, 1.0, size=(n, p))
    eps = rng.normal(0.0, np.sqrt(THEORY_NOISE_VAR), size=n)
    y = theory_mean(X) + (eps if noise else 0.0)
    diff = y[:, None] - y[None, :]
    return SimulatedSet(
        family="theory",
        X=FeatureMatrix(X),
        Z=DistanceMatrix(0.5 * diff * diff),
        y=y,
        meta={"seed": seed, "noise_var": THEORY_NOISE_VAR},
    )


GENERATORS: dict[str, Callable[..., SimulatedSet]] = {
    "regression": gen_regression_distance,
    "bilinear": gen_bilinear_distance,
    "radial": gen_radial_distance,
    "theory": gen_additive_theory,
}


def generate(family: str, n: int, seed: int, **kwargs: Any) -> SimulatedSet:
    """
    Dispatch to a family generator by name.

    Raises:
        UnknownFamilyError: For names outside regression, bilinear, radial, theory
    """
    try:
        generator = GENERATORS[family]
    except KeyError:
        raise UnknownFamilyError(f"Unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    return generator(n, seed, **kwargs)


# ========== Bayes oracles ==========

def bayes_distance_oracle(family: str, x: Any, x_prime: Any) -> np.ndarray | float:
    """
    Expected observed distance E[z | x, x'] under the generating model.

    * theory: (m(x) - m(x'))^2 / 2 + sigma^2
    * regression: (m(x) - m(x'))^2 + Var(eps - eps') with Var(eps) = 0.2^2 / 12
    * bilinear: 1 - m(x) m(x')
    * radial: (r(x) - r(x'))^2

    Args:
        family: Family name
        x: Feature vector or (m, p) rows
        x_prime: Matching vector or rows

    Returns:
        Scalar for vectors, array for row batches

    Raises:
        UnknownFamilyError: If no closed form is known for the family
    """
    scalar = np.ndim(x) == 1 and np.ndim(x_prime) == 1
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    b = np.atleast_2d(np.asarray(x_prime, dtype=np.float64))

    if family == "theory":
        diff = theory_mean(a) - theory_mean(b)
        value = 0.5 * diff * diff + THEORY_NOISE_VAR
    elif family == "regression":
        diff = regression_mean(a) - regression_mean(b)
        value = diff * diff + 2.0 * (2.0 * REGRESSION_NOISE) ** 2 / 12.0
    elif family == "bilinear":
        value = 1.0 - regression_mean(a) * regression_mean(b)
    elif family == "radial":
        diff = radial_norm(a) - radial_norm(b)
        value = diff * diff
    else:
        raise UnknownFamilyError(f"No Bayes oracle for family {family!r}")
    return float(value[0]) if scalar else value


def bayes_distance_matrix(family: str, X: Any) -> np.ndarray:
    """Oracle distances between all rows of X (diagonal included)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.asarray(bayes_distance_oracle(family, X[i.ravel()], X[j.ravel()])).reshape(n, n)


# ========== Synthetic network ==========

def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidProbabilityError(f"{name} must lie in [0, 1], got {value}")


def block_sizes(n: int, blocks: int) -> list[int]:
    """Near-equal block sizes, larger blocks first."""
    base, extra = divmod(n, blocks)
    return [base + (1 if k < extra else 0) for k in range(blocks)]


def gen_sbm_network(
    n: int,
    blocks: int,
    p_in: float,
    p_out: float,
    attr_noise: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Stochastic block model graph with noisy one-hot block attributes.

    Args:
        n: Nodes
        blocks: Communities (2 <= blocks <= n)
        p_in: Edge probability within a block
        p_out: Edge probability between blocks
        attr_noise: Probability of flipping each attribute bit
        seed: Generator seed

    Returns:
        (adjacency, attributes): symmetric 0/1 (n, n) array with zero diagonal
        and an (n, blocks) 0/1 attribute matrix

    Raises:
        InvalidProbabilityError: If a probability lies outside [0, 1]
        ValidationError: If blocks is outside [2, n]
    """
    for name, value in (("p_in", p_in), ("p_out", p_out), ("attr_noise", attr_noise)):
        _check_probability(name, value)
    if not 2 <= blocks <= n:
        raise ValidationError(f"Need 2 <= blocks <= n, got blocks={blocks}, n={n}")

    rng = substream(seed, DATA_STREAM, len(FAMILIES))
    sizes = block_sizes(n, blocks)
    probs = [[p_in if a == b else p_out for b in range(blocks)] for a in range(blocks)]
    graph = nx.stochastic_block_model(sizes, probs, seed=int(rng.integers(2**32)))
    adjacency = nx.to_numpy_array(graph, nodelist=range(n), dtype=np.float64)
    np.fill_diagonal(adjacency, 0.0)

    membership = np.repeat(np.arange(blocks), sizes)
    attributes = np.zeros((n, blocks), dtype=np.float64)
    attributes[np.arange(n), membership] = 1.0
    flips = rng.uniform(size=attributes.shape) < attr_noise
    attributes[flips] = 1.0 - attributes[flips]

    _logger.debug(
        f"SBM: n={n}, blocks={blocks}, edges={int(adjacency.sum() // 2)}, "
        f"flipped {int(flips.sum())} attribute bits"
    )
    return adjacency, attributes
