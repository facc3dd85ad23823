"""Order-preserving parallel map capped by the TIM_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "TIM_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument first, then TIM_THREADS, then 1."""
    if threads is None:
        raw = os.environ.get(ENV_VAR, "").strip()
        threads = int(raw) if raw else 1
    return max(1, int(threads))


def pmap(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None,
         initializer=None, initargs=()) -> list[R]:
    """Apply ``fn`` to every item; results come back in input order.

    Work runs in worker processes when more than one worker is allowed, so
    ``fn`` and the items must be picklable.  Results never depend on the
    worker count.
    """
    n = resolve_threads(threads)
    items = list(items)
    if n == 1 or len(items) < 2:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    workers = min(n, len(items))
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, initializer=initializer,
                             initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
