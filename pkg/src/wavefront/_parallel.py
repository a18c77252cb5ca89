"""Replicate-level parallelism.

The compiled kernels release the GIL, so a thread pool is enough.  The
worker count comes from ``WAVEFRONT_THREADS`` (default 1); results are
returned in input order whatever the scheduling, so outputs stay
deterministic.
"""
import os
from concurrent.futures import ThreadPoolExecutor


def threads():
    try:
        n = int(os.environ.get("WAVEFRONT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def pmap(fn, items):
    items = list(items)
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
