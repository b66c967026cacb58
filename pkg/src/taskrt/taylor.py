"""Maclaurin series of ln(1 + x), computed four ways plus a sequential reference.

    ln(1 + x) = sum_{k >= 1} (-1)^(k+1) x^k / k,   |x| < 1

Every implementation evaluates terms with the same numpy kernel
(:func:`taylor_terms`) and sums each range strictly left to right, so for a
fixed partition plan the results are bit-reproducible, and a single
partition reproduces :func:`reference_sum` exactly.

Buffer element ``j`` always holds term ``k = j + 1``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import algorithms as alg
from .errors import TaskError
from .futures import TaskFuture, async_spawn, spawn_coroutine, when_all
from .runtime import WorkerPool
from .senders import bulk, schedule, sync_wait, then, thread_pool_scheduler

BLOCK = 1 << 16

PARADIGMS = ("futures", "await", "paralg", "sndrcv")


@dataclass(frozen=True)
class TaylorParams:
    n: int
    partitions: int = 1
    x: float = 0.1

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise TaskError(f"term count n must be an int >= 1, got {self.n!r}", origin="taylor")
        if isinstance(self.partitions, bool) or not isinstance(self.partitions, int) or self.partitions < 1:
            raise TaskError(f"partitions must be an int >= 1, got {self.partitions!r}", origin="taylor")
        if self.partitions > self.n:
            raise TaskError(f"partitions ({self.partitions}) exceeds n ({self.n})", origin="taylor")
        if not (math.isfinite(self.x) and abs(self.x) < 1):
            raise TaskError(f"series diverges: need |x| < 1, got {self.x!r}", origin="taylor")


@dataclass(frozen=True)
class PartitionPlan:
    ranges: tuple[tuple[int, int], ...]

    def __iter__(self):
        return iter(self.ranges)

    def __len__(self):
        return len(self.ranges)


@dataclass(frozen=True)
class WorkloadResult:
    value: float
    elapsed: float
    paradigm: str


def taylor_terms(k: np.ndarray, x: float) -> np.ndarray:
    """Terms (-1)^(k+1) x^k / k for a float64 array of term indices."""
    return np.power(-1.0, k + 1.0) * np.power(x, k) / k


def taylor_term(k: int, x: float) -> float:
    return float(taylor_terms(np.array([k], dtype=np.float64), x)[0])


def seq_sum(values: np.ndarray, start: float = 0.0) -> float:
    """Strict left-to-right float64 sum (numpy's ``sum`` is pairwise)."""
    if len(values) == 0:
        return start
    acc = np.empty(len(values) + 1)
    acc[0] = start
    acc[1:] = values
    return float(np.add.accumulate(acc)[-1])


def range_sum(begin: int, end: int, x: float, start: float = 0.0) -> float:
    """Left-to-right sum of the terms for buffer indices [begin, end)."""
    acc = start
    for b in range(begin, end, BLOCK):
        k = np.arange(b + 1, min(b + BLOCK, end) + 1, dtype=np.float64)
        acc = seq_sum(taylor_terms(k, x), acc)
    return acc


def partition(n: int, partitions: int) -> PartitionPlan:
    """partitions-1 ranges of n // partitions, the last one absorbing the remainder."""
    if partitions < 1 or partitions > n:
        raise TaskError(f"need 1 <= partitions <= n, got partitions={partitions}, n={n}", origin="taylor")
    size = n // partitions
    ranges = [(i * size, (i + 1) * size) for i in range(partitions - 1)]
    ranges.append(((partitions - 1) * size, n))
    return PartitionPlan(tuple(ranges))


def reference_sum(params: TaylorParams) -> float:
    return range_sum(0, params.n, params.x)


def _timed(paradigm: str, fn) -> WorkloadResult:
    start = time.perf_counter()
    value = fn()
    return WorkloadResult(value, time.perf_counter() - start, paradigm)


def _spawn_partials(pool: WorkerPool, params: TaylorParams) -> list[TaskFuture[float]]:
    return [async_spawn(pool, range_sum, b, e, params.x) for b, e in partition(params.n, params.partitions)]


def taylor_futures(pool: WorkerPool, params: TaylorParams) -> WorkloadResult:
    """One task per partition; partials collected by a when_all continuation."""

    def run():
        def collect(ready):
            result = 0.0
            for f in ready.get():
                result += f.get()
            return result

        return when_all(_spawn_partials(pool, params)).then(collect).get()

    return _timed("futures", run)


async def _taylor_coroutine(pool: WorkerPool, params: TaylorParams) -> float:
    futures = await when_all(_spawn_partials(pool, params))
    result = 0.0
    for f in futures:
        result += await f
    return result


def taylor_await(pool: WorkerPool, params: TaylorParams) -> WorkloadResult:
    """Same dataflow as :func:`taylor_futures`, joined with ``await`` in a coroutine."""
    return _timed("await", lambda: spawn_coroutine(pool, _taylor_coroutine(pool, params)).get())


def taylor_paralg(
    pool: WorkerPool,
    params: TaylorParams,
    chunker: alg.ChunkPolicy | None = None,
    policy: alg.ExecutionPolicy = alg.par,
) -> WorkloadResult:
    """Fill a buffer with 1..n, map it to terms in parallel, then reduce.

    With ``par`` the reduce runs as ``par(task)`` and its future is joined,
    the way a chunked for_each followed by a task-policy reduce would be.
    ``partitions`` is not used: chunking comes from ``chunker``.
    """
    x = params.x

    def kernel(view):
        return taylor_terms(view, x)

    def run():
        buf = np.arange(1, params.n + 1, dtype=np.float64)
        alg.par_for_each(pool, policy, chunker, buf, kernel, per_chunk=True)
        reduce_policy = alg.par_task if policy.mode is alg.ExecutionMode.PAR else policy
        out = alg.par_reduce(pool, reduce_policy, chunker, buf, 0.0, _add, chunk_reduce=seq_sum)
        return out.get() if isinstance(out, TaskFuture) else out

    return _timed("paralg", run)


def _add(a: float, b: float) -> float:
    return a + b


def sndrcv_pipeline(pool: WorkerPool, params: TaylorParams, partials: list[float]):
    """``schedule | bulk(partitions, partial sum) | then(sum partials)``, unstarted."""
    plan = partition(params.n, params.partitions)
    x = params.x

    def body(i):
        begin, end = plan.ranges[i]
        partials[i] = range_sum(begin, end, x)

    def combine():
        total = 0.0
        for p in partials:
            total += p
        return total

    return schedule(thread_pool_scheduler(pool)) | bulk(params.partitions, body) | then(combine)


def taylor_sndrcv(pool: WorkerPool, params: TaylorParams) -> WorkloadResult:
    """Sender pipeline run by ``sync_wait``.

    An error completion is re-raised; a stopped completion raises
    :class:`TaskError` with origin ``"stopped"``.
    """

    def run():
        partials = [0.0] * params.partitions
        done = sync_wait(sndrcv_pipeline(pool, params, partials))
        if done.stopped:
            raise TaskError("sender pipeline was stopped", origin="stopped")
        return done.unwrap()

    return _timed("sndrcv", run)


def run_paradigm(paradigm: str, pool: WorkerPool, params: TaylorParams, chunker=None) -> WorkloadResult:
    if paradigm == "futures":
        return taylor_futures(pool, params)
    if paradigm == "await":
        return taylor_await(pool, params)
    if paradigm == "paralg":
        return taylor_paralg(pool, params, chunker)
    if paradigm == "sndrcv":
        return taylor_sndrcv(pool, params)
    raise TaskError(f"unknown paradigm {paradigm!r}", origin="taylor")
