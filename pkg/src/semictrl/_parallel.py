"""Ordered map over independent work items.

The worker count comes from ``SEMICTRL_THREADS`` (default 1). Results are
always returned in input order, so output does not depend on scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "SEMICTRL_THREADS"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
