"""Bounded thread-pool helper for pure evaluation fan-out."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_ENV = "CHAINPERF_THREADS"


def thread_count() -> int:
    """Worker cap: CHAINPERF_THREADS if set, else a modest CPU-based default."""
    raw = os.environ.get(_ENV)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{_ENV} must be an integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"{_ENV} must be >= 1, got {value}")
        return value
    return min(8, os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map preserving order, fanned out over the thread cap."""
    items = list(items)
    workers = min(thread_count(), len(items)) or 1
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
