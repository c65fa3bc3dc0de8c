"""Kernel-internal fan-out capped by CENHDR_THREADS.

Work is split over independent output slices only, and results are
reassembled in submission order, so outputs do not depend on the thread
count.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar
import os

T = TypeVar("T")
R = TypeVar("R")

_thread_limit: int | None = None


def set_thread_limit(threads: int | None) -> None:
    """Override CENHDR_THREADS for this process; None restores the environment value."""
    global _thread_limit
    _thread_limit = None if threads is None else max(1, int(threads))


def thread_limit() -> int:
    if _thread_limit is not None:
        return _thread_limit
    return max(1, int(os.getenv("CENHDR_THREADS", "1")))


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Apply `fn` to every item, in parallel when allowed, preserving order."""
    workers = min(thread_limit(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
