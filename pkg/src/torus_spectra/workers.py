"""Order-preserving thread-pool map used for data-parallel assembly."""

import concurrent.futures
import logging
import os
from collections.abc import Iterable
from typing import Callable, Optional, TypeVar

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "TORUS_SPECTRA_THREADS"


def worker_count(max_workers: Optional[int] = None) -> int:
    """Resolve the number of worker threads.

    An explicit argument wins over ``TORUS_SPECTRA_THREADS``; without either the
    CPU count is used.
    """
    if max_workers is not None:
        return max(1, max_workers)
    load_dotenv()
    raw = os.getenv(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
        else:
            if value > 0:
                return value
            logger.warning("Ignoring non-positive %s=%r", THREADS_ENV_VAR, raw)
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> list[R]:
    """Apply ``fn`` to every item, returning results in input order.

    Args:
        fn: Pure function of one item
        items: Work items
        max_workers: Thread cap (see ``worker_count``)

    Returns:
        List of results, one per item
    """
    work = list(items)
    workers = min(worker_count(max_workers), len(work))
    if workers <= 1:
        return [fn(item) for item in work]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, work))
