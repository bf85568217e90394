"""Row-parallel worker pool, sized by GRCA_THREADS."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

from grca.errors import ConfigError

T = TypeVar("T")

THREADS_ENV = "GRCA_THREADS"


def worker_count(threads: Optional[int] = None) -> int:
    """Number of worker threads: explicit value, else GRCA_THREADS, else 1."""
    if threads is not None:
        return max(1, int(threads))
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'") from e


def map_rows(fn: Callable[[int], T], n_rows: int, threads: int = 1) -> List[T]:
    """Apply `fn` to every row index, keeping row order."""
    if threads <= 1 or n_rows <= 1:
        return [fn(i) for i in range(n_rows)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_rows)))
