"""Deterministic worker pool.

HOPFLOW_THREADS selects the number of worker threads (default 1).
``ordered_map`` always yields results in input order, so artifacts are
bit-identical regardless of thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("HOPFLOW_THREADS", "").strip()
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        return 1
    return max(1, k)


def ordered_map(fn, items):
    items = list(items)
    k = thread_count()
    if k <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
