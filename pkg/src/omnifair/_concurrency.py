"""Worker pool sizing for the parallelizable inner loops.

The ``OMNIFAIR_THREADS`` environment variable caps the worker count; the
default is sequential execution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("OMNIFAIR_THREADS", "")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map, threaded when OMNIFAIR_THREADS allows it."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
