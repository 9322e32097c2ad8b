"""
Scheduler Module - process pool for independent training runs.

A single run is strictly sequential, so runs are the unit of parallelism. Workers share
nothing; each job writes only its own run directory.
"""

import os
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

# Global executor instance
_executor: Optional[ProcessPoolExecutor] = None
_executor_workers = 0


def default_workers() -> int:
    return max(1, int(os.getenv("NARROWNET_THREADS", "1")))


def get_executor(workers: int) -> ProcessPoolExecutor:
    """Get or create the global pool with the requested worker count."""
    global _executor, _executor_workers
    if _executor is not None and _executor_workers != workers:
        shutdown_executor()
    if _executor is None:
        _executor = ProcessPoolExecutor(max_workers=workers)
        _executor_workers = workers
        logger.info(f"Started process pool with {workers} workers")
    return _executor


def shutdown_executor():
    global _executor, _executor_workers
    if _executor is not None:
        _executor.shutdown(wait=True)
        _executor = None
        _executor_workers = 0


def run_jobs(fn: Callable[..., Any], jobs: Sequence[Tuple], workers: Optional[int] = None) -> List[Any]:
    """
    Call fn(*job) for every job and return results in job order.

    workers == 1 runs in-process, which keeps runs bitwise reproducible and easy to debug.
    """
    workers = workers or default_workers()
    if workers == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]

    executor = get_executor(workers)
    futures = {executor.submit(fn, *job): i for i, job in enumerate(jobs)}
    results: List[Any] = [None] * len(jobs)
    for done, future in enumerate(as_completed(futures), start=1):
        results[futures[future]] = future.result()
        logger.debug(f"{done}/{len(jobs)} jobs finished")
    return results
