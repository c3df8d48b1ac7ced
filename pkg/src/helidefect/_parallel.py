"""Thread-count policy shared by the FFT wrappers and ladder evaluation."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "HELIDEFECT_THREADS"


def n_threads():
    raw = os.environ.get(ENV_VAR, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def ordered_map(fn, items):
    """Map ``fn`` over ``items`` with up to ``n_threads()`` workers, preserving order."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
