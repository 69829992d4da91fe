import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "MVTC_THREADS"


def worker_count() -> int:
    """Thread cap from ``MVTC_THREADS``; defaults to the CPU count."""
    raw = os.environ.get(ENV_THREADS, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def map_ordered(fn, items):
    """``list(map(fn, items))``, run on up to ``worker_count()`` threads."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
