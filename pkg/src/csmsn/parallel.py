"""Process-pool mapping with a worker cap from ``CSMSN_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("CSMSN_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def map_jobs(fn, jobs, workers: int | None = 1):
    """Ordered map; falls back to a plain loop for one worker or one job."""
    jobs = list(jobs)
    n = min(worker_count(workers), len(jobs))
    if n <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))
