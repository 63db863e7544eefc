"""Deterministic replica fan-out.

Replica r always draws from the stream derived from (seed, r), so the
merged results are a pure function of (config, seed) no matter how many
worker threads run them or in which order they finish.  The kernels are
compiled nogil, which is what makes a thread pool effective here.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ParameterError
from .rng import Stream

THREADS_ENV = "DYNVOTER_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ParameterError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def run_replicas(worker, reps: int, seed: int, threads: int | None = None) -> list:
    """Run ``worker(replica, stream)`` for replica = 0..reps-1.

    Results come back ordered by replica index regardless of scheduling.
    """
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps!r}")
    if threads is None:
        threads = default_threads()
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads!r}")

    def job(replica: int):
        return worker(replica, Stream(seed, replica))

    if threads == 1:
        return [job(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(reps)))
