"""Worker-count plumbing shared by the FFT calls and the randomized sweeps.

Results never depend on the worker count: FFT workers split independent
1D transforms, and sweeps use order-preserving maps with per-sample seeds.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "BSQ_THREADS"


def worker_count():
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return value


def ordered_map(fn, items):
    """Like ``list(map(fn, items))`` but spread over BSQ_THREADS workers."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
