"""Utility functions for smerf."""

from __future__ import annotations
import logging
import os

from joblib import cpu_count


__version__ = "0.1.0"
__author__ = "SMERF Contributors"
__license__ = "MIT"

THREADS_ENV = "SMERF_THREADS"


def setup_logging(level: int = logging.INFO) -> None:
    """
    Configure logging for smerf.

    Args:
        level: Logging level (default: INFO)
    """
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def resolve_workers(n_jobs: int | None = None) -> int:
    """
    Resolve the number of worker threads.

    ``SMERF_THREADS`` caps whatever was requested. Results never depend on
    the value returned here.

    Args:
        n_jobs: Requested workers; ``None`` or ``-1`` means all CPUs

    Returns:
        Positive worker count
    """
    cpus = cpu_count() or 1
    workers = cpus if n_jobs is None or n_jobs < 1 else n_jobs

    cap = os.getenv(THREADS_ENV)
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            logging.getLogger(__name__).warning(
                f"Ignoring non-integer {THREADS_ENV}={cap!r}"
            )
    return max(1, workers)
