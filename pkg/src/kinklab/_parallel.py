import os
from concurrent.futures import ProcessPoolExecutor


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("KINKLAB_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Map ``fn`` over ``items`` in order, using a process pool when
    KINKLAB_THREADS > 1."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
