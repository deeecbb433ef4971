"""Order-preserving thread pool capped by ``MCFLAB_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker count from ``MCFLAB_THREADS`` (default 1, minimum 1)."""
    raw = os.environ.get("MCFLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """``list(map(fn, items))``, possibly threaded; result order is input order.

    Reductions over the results are left to the caller, so totals do not
    depend on the number of workers.
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
