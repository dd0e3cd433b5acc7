"""Worker-pool plumbing shared by the hashing engines.

All parallelism in sentinel flows through these helpers so that results are
worker-count independent by construction: inputs are split into contiguous
index ranges and outputs are written back by index (or merged with an
associative-commutative combine).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple, TypeVar

T = TypeVar("T")

WORKERS_ENV = "SENTINEL_WORKERS"


def resolve_workers(requested: Optional[int] = None) -> int:
    """Pick a worker count: explicit arg, then env override, then CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_ranges(n: int, workers: int) -> List[Tuple[int, int]]:
    """Split [0, n) into at most `workers` contiguous half-open ranges."""
    workers = min(max(1, workers), n) if n else 0
    if workers == 0:
        return []
    base, extra = divmod(n, workers)
    ranges = []
    start = 0
    for i in range(workers):
        stop = start + base + (1 if i < extra else 0)
        ranges.append((start, stop))
        start = stop
    return ranges


def run_chunked(n: int, workers: int, fn: Callable[[int, int], T]) -> List[T]:
    """Run fn(start, stop) over contiguous chunks of [0, n).

    Results are returned in chunk order regardless of completion order, so a
    caller that writes by index or folds with a commutative combine gets
    identical output for any worker count.
    """
    ranges = chunk_ranges(n, workers)
    if len(ranges) <= 1:
        return [fn(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in ranges]
        return [f.result() for f in futures]


def run_tasks(tasks: List[Callable[[], T]], workers: int) -> List[T]:
    """Run independent thunks, returning results in submission order."""
    if workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]
