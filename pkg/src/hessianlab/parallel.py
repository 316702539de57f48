"""Ordered fan-out over independent work items."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Worker cap from HESSIANLAB_THREADS (default 1)."""
    raw = os.environ.get("HESSIANLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"HESSIANLAB_THREADS must be an integer, got {raw!r}") from None


def map_ordered(fn, items):
    """Apply ``fn`` to each item; results come back in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
