from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "DENFUNC_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(fn, items):
    """Ordered map; results come back in input order whatever the thread count."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
