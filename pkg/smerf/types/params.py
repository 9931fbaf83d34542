"""Hyperparameter and run configuration models."""

from __future__ import annotations
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from ..errors import ValidationError

MAX_SEED = 2**64


class Hyperparams(BaseModel):
    """
    Forest hyperparameters.

    Attributes:
        num_trees: Number of trees B
        d: Candidate projections per node; ``None`` means round(sqrt(p))
        min_parent: Smallest node size that is still split
        max_depth: Depth limit; ``None`` grows until min_parent or no gain
        sampling: Per-tree bag: ``bootstrap`` or ``subsample`` (without replacement)
        subsample_size: a_n for subsampling; int count or fraction in (0, 1]
        projection_mode: ``axis`` (vanilla random forest) or ``binary`` (sparse oblique)
        nonzeros: Expected nonzeros per sparse-binary projection (lambda)
        seed: Master seed for every per-tree stream
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_trees: int = Field(500, ge=1)
    d: int | None = Field(None, ge=1)
    min_parent: int = Field(2, ge=2)
    max_depth: int | None = Field(None, ge=0)
    sampling: Literal["bootstrap", "subsample"] = "bootstrap"
    subsample_size: int | float | None = None
    projection_mode: Literal["axis", "binary"] = "axis"
    nonzeros: float = Field(2.0, ge=1.0)
    seed: int = Field(0, ge=0, lt=MAX_SEED)

    @field_validator("subsample_size")
    @classmethod
    def _check_subsample_size(cls, value: int | float | None) -> int | float | None:
        if value is None:
            return value
        if isinstance(value, float):
            if not 0.0 < value <= 1.0:
                raise ValueError("fractional subsample_size must lie in (0, 1]")
            return value
        if int(value) < 1:
            raise ValueError("subsample_size must be >= 1")
        return int(value)

    @classmethod
    def build(cls, **kwargs: Any) -> Hyperparams:
        """
        Validate keyword arguments into a Hyperparams instance.

        Raises:
            ValidationError: If any field violates its constraint
        """
        try:
            return cls(**kwargs)
        except PydanticValidationError as e:
            raise ValidationError(
                f"Invalid hyperparameters: {e.error_count()} error(s)",
                details={"errors": e.errors(include_url=False)},
            ) from e

    def updated(self, **changes: Any) -> Hyperparams:
        """Return a validated copy with some fields replaced."""
        return Hyperparams.build(**{**self.model_dump(), **changes})

    def candidates(self, p: int) -> int:
        """Projections drawn per node (axis mode caps at p)."""
        d = self.d if self.d is not None else max(1, round(math.sqrt(p)))
        if self.projection_mode == "axis":
            d = min(d, p)
        return d

    def bag_size(self, n: int) -> int:
        """Points drawn per tree: n for bootstrap, a_n for subsampling."""
        if self.sampling == "bootstrap" or self.subsample_size is None:
            return n
        if isinstance(self.subsample_size, float):
            return max(1, min(n, math.ceil(self.subsample_size * n)))
        return min(n, int(self.subsample_size))

    @property
    def fully_grown(self) -> bool:
        return self.min_parent == 2 and self.max_depth is None

    def __str__(self) -> str:
        return (
            f"Hyperparams(B={self.num_trees}, d={self.d}, min_parent={self.min_parent}, "
            f"mode={self.projection_mode}, sampling={self.sampling}, seed={self.seed})"
        )


class RunConfig(BaseModel):
    """
    Resolved command-line run.

    Attributes:
        command: Sub-command name
        inputs: Named input paths that must exist at execution
        out: Output file or directory
        seed: Master seed
        replicates: Replicate count for experiment commands
        n_jobs: Worker threads (``None`` = all CPUs, capped by SMERF_THREADS)
        hyperparams: Overrides for training commands
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    inputs: dict[str, Path] = Field(default_factory=dict)
    out: Path | None = None
    seed: int = Field(0, ge=0, lt=MAX_SEED)
    replicates: int = Field(1, ge=1)
    n_jobs: int | None = None
    hyperparams: Hyperparams | None = None

    def check_inputs(self) -> None:
        """
        Raises:
            ValidationError: If a referenced input path does not exist
        """
        missing = {name: str(path) for name, path in self.inputs.items() if not path.exists()}
        if missing:
            raise ValidationError(
                f"Missing input file(s): {', '.join(missing.values())}",
                details={"missing": missing},
            )
