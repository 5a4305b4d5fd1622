"""Worker pools, cell partitions and deterministic reductions.

Every kernel reads an immutable snapshot and writes only the output rows of the cells it
owns, so results do not depend on how cells are split across workers.
"""

from __future__ import annotations

import functools
import logging
import math
import operator
import os
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
from typing import Any, TypedDict

import numpy as np
from numpy.typing import NDArray

from .errors import DgkError, KernelError

logger = logging.getLogger(__name__)

WORKERS_ENV = "DGV_WORKERS"


@dataclass(frozen=True)
class Partition:
    """Contiguous flat-cell ranges, one per worker; empty ranges are allowed."""

    workers: int
    ranges: tuple[tuple[int, int], ...]

    @property
    def ncells(self) -> int:
        return self.ranges[-1][1] if self.ranges else 0


def make_partition(ncells: int, workers: int) -> Partition:
    """Split ``ncells`` flat cells into ``workers`` nearly equal contiguous blocks."""
    if workers < 1:
        raise ValueError(f"worker count must be positive, got {workers}")
    base, extra = divmod(ncells, workers)
    ranges = []
    start = 0
    for w in range(workers):
        stop = start + base + (1 if w < extra else 0)
        ranges.append((start, stop))
        start = stop
    return Partition(workers=workers, ranges=tuple(ranges))


def default_workers() -> int:
    """Worker count from DGV_WORKERS, else 1."""
    value = os.getenv(WORKERS_ENV)
    if value is None:
        return 1
    try:
        workers = int(value)
    except ValueError:
        logger.warning(f"Ignoring non-integer {WORKERS_ENV}={value!r}")
        return 1
    return max(workers, 1)


class MockWorkerPool:
    """In-thread stand-in for a pool when a single worker is requested."""

    def __enter__(self):
        return self

    def __exit__(self, *excinfo):
        pass

    def close(self):
        pass

    def join(self):
        pass

    map = staticmethod(lambda func, iterable: list(map(func, iterable)))


def make_worker_pool(workers: int) -> ThreadPool | MockWorkerPool:
    """Thread pool for ``workers`` > 1, otherwise the no-overhead mock pool."""
    if workers == 1:
        return MockWorkerPool()
    logger.debug(f"Starting thread pool with {workers} workers")
    return ThreadPool(workers)


def parallel_map_cells(
    partition: Partition,
    kernel: Callable[[int, int], NDArray[Any]],
    out: NDArray[Any],
    pool: ThreadPool | MockWorkerPool | None = None,
) -> NDArray[Any]:
    """Run ``kernel(start, stop)`` over every non-empty range and store rows into ``out``.

    The call returns after every range has finished (the barrier between phases).

    Raises:
        DgkError: Solver errors raised by the kernel propagate unchanged
        KernelError: Any other exception, tagged with the failing cell range
    """

    def task(bounds: tuple[int, int]) -> None:
        start, stop = bounds
        try:
            out[start:stop] = kernel(start, stop)
        except DgkError:
            raise
        except Exception as exc:
            raise KernelError(start, stop, exc) from exc

    work = [r for r in partition.ranges if r[1] > r[0]]
    if pool is None:
        for bounds in work:
            task(bounds)
    else:
        pool.map(task, work)
    return out


def deterministic_reduce(
    values: Iterable[float],
    op: Callable[[float, float], float] = operator.add,
    identity: float = 0.0,
) -> float:
    """Combine values in fixed sequential order; sums are exactly rounded with fsum."""
    if op is operator.add:
        return math.fsum(values)
    return functools.reduce(op, values, identity)


class ScalingRow(TypedDict):
    size: int
    workers: int
    seconds: float
    speedup: float


def scaling_report(
    run_case: Callable[[int, int], object],
    sizes: Sequence[int],
    workers: Sequence[int],
) -> list[ScalingRow]:
    """Wall time of ``run_case(size, workers)`` for every size and worker count.

    Speedup is relative to the single-worker time of the same size, which is measured
    first even when 1 is not among ``workers``.
    """
    rows: list[ScalingRow] = []
    for size in sizes:
        timings: dict[int, float] = {}
        for w in sorted(set(workers) | {1}):
            start = time.perf_counter()
            run_case(size, w)
            timings[w] = time.perf_counter() - start
            logger.info(f"Scaling run size={size} workers={w}: {timings[w]:.3f}s")
        for w in workers:
            rows.append(
                ScalingRow(
                    size=size,
                    workers=w,
                    seconds=timings[w],
                    speedup=timings[1] / timings[w] if timings[w] > 0.0 else 1.0,
                )
            )
    return rows


def block_sum(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Column sums over the leading axis with exact rounding, independent of chunking."""
    flat = np.asarray(values, dtype=float).reshape(len(values), -1)
    sums = np.array([math.fsum(flat[:, c]) for c in range(flat.shape[1])])
    return sums.reshape(np.shape(values)[1:])
