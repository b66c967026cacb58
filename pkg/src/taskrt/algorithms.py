"""Chunked parallel ``for_each`` / ``reduce`` with execution and chunk policies.

Execution policies::

    seq        run inline on the calling thread, in index order
    par        split into chunks, run them on the pool, block until done
    par_task   like par but return a TaskFuture instead of blocking

Chunk policies (attach with ``par.with_(...)`` or pass ``chunker=``)::

    StaticChunkSize(c)    fixed chunks of c, dealt round-robin to workers
    AutoChunkSize(t)      run the first 1% sequentially, then size chunks so
                          each takes about t seconds
    DynamicChunkSize(c)   chunks of c claimed from a shared cursor by
                          whichever worker is free

Element closures see one element at a time and return its replacement
(``data[i] = f(data[i])``).  With ``per_chunk=True`` they see a slice
instead, which is how numpy kernels get whole chunks.
"""

from __future__ import annotations

import enum
import math
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterator, Sequence, TypeVar, Union

from .errors import TaskError
from .futures import TaskFuture, async_spawn, make_ready_future, when_all
from .runtime import WorkerPool, resolve_pool

T = TypeVar("T")

DEFAULT_TARGET_CHUNK_TIME = 200e-6


@dataclass(frozen=True)
class StaticChunkSize:
    chunk: int

    def __post_init__(self):
        _check_chunk(self.chunk)


@dataclass(frozen=True)
class DynamicChunkSize:
    chunk: int

    def __post_init__(self):
        _check_chunk(self.chunk)


@dataclass(frozen=True)
class AutoChunkSize:
    target: float = DEFAULT_TARGET_CHUNK_TIME
    timer: Callable[[], float] = field(default=time.perf_counter, compare=False, repr=False)

    def __post_init__(self):
        if not self.target > 0:
            raise TaskError(f"target chunk time must be > 0, got {self.target!r}", origin="algorithms")


ChunkPolicy = Union[StaticChunkSize, AutoChunkSize, DynamicChunkSize]


def _check_chunk(chunk: int) -> None:
    if isinstance(chunk, bool) or not isinstance(chunk, int) or chunk < 1:
        raise TaskError(f"chunk size must be a positive int, got {chunk!r}", origin="algorithms")


class ExecutionMode(str, enum.Enum):
    SEQ = "seq"
    PAR = "par"
    PAR_TASK = "par_task"


class _TaskTag:
    def __repr__(self) -> str:
        return "task"


task = _TaskTag()


@dataclass(frozen=True)
class ExecutionPolicy:
    mode: ExecutionMode
    chunker: ChunkPolicy | None = None

    def with_(self, chunker: ChunkPolicy) -> ExecutionPolicy:
        return replace(self, chunker=chunker)

    def __call__(self, tag: _TaskTag) -> ExecutionPolicy:
        # par(task) -> par_task, mirroring the C++ spelling.
        if tag is not task or self.mode is not ExecutionMode.PAR:
            raise TaskError("only par(task) is supported", origin="algorithms")
        return replace(self, mode=ExecutionMode.PAR_TASK)


seq = ExecutionPolicy(ExecutionMode.SEQ)
par = ExecutionPolicy(ExecutionMode.PAR)
par_task = ExecutionPolicy(ExecutionMode.PAR_TASK)


@dataclass(frozen=True)
class ChunkPlan:
    """Ordered half-open index ranges."""

    ranges: tuple[tuple[int, int], ...]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.ranges)

    def __len__(self) -> int:
        return len(self.ranges)

    def __getitem__(self, i):
        return self.ranges[i]

    def shifted(self, offset: int) -> ChunkPlan:
        return ChunkPlan(tuple((b + offset, e + offset) for b, e in self.ranges))

    def covers(self, begin: int, end: int) -> bool:
        """True iff the ranges are non-empty, sorted, disjoint and tile [begin, end)."""
        cursor = begin
        for b, e in self.ranges:
            if b != cursor or e <= b:
                return False
            cursor = e
        return cursor == end


def compute_chunks_static(n: int, chunk: int) -> ChunkPlan:
    """Split [0, n) into ceil(n / chunk) pieces, all of length ``chunk`` but the last."""
    _check_chunk(chunk)
    if n < 0:
        raise TaskError(f"element count must be >= 0, got {n}", origin="algorithms")
    return ChunkPlan(tuple((b, min(b + chunk, n)) for b in range(0, n, chunk)))


def calibration_size(n: int) -> int:
    """Number of leading elements auto chunking runs sequentially: max(1, ceil(n / 100))."""
    return max(1, -(-n // 100))


def _chunk_from_timing(n: int, elapsed: float, measured: int, target: float, worker_count: int) -> int:
    mean = elapsed / measured
    if mean <= 0:
        return max(1, -(-n // worker_count))
    return min(max(math.ceil(target / mean), 1), max(n, 1))


def calibrate_auto_chunk(
    n: int,
    f: Callable[[int], Any],
    target: float = DEFAULT_TARGET_CHUNK_TIME,
    *,
    worker_count: int = 1,
    timer: Callable[[], float] = time.perf_counter,
) -> int:
    """Run ``f(i)`` for the calibration prefix and derive a chunk size.

    The chunk is ceil(target / mean element time) clamped to [1, n]; when
    the measured time is zero it falls back to ceil(n / worker_count).
    """
    if n < 1:
        raise TaskError("auto chunk calibration needs n >= 1", origin="algorithms")
    if not target > 0:
        raise TaskError(f"target chunk time must be > 0, got {target!r}", origin="algorithms")
    measured = calibration_size(n)
    start = timer()
    for i in range(measured):
        f(i)
    return _chunk_from_timing(n, timer() - start, measured, target, worker_count)


class _Run:
    """Shared bookkeeping for one parallel call: first error, stop flag."""

    def __init__(self):
        self.lock = threading.Lock()
        self.error: BaseException | None = None

    @property
    def stopped(self) -> bool:
        return self.error is not None

    def fail(self, exc: BaseException) -> None:
        with self.lock:
            if self.error is None:
                self.error = exc


def _chunk_tasks(pool, run, plans, run_range) -> list[TaskFuture]:
    def work(ranges):
        out = []
        for b, e in ranges:
            # Stop at chunk boundaries once any chunk has failed.
            if run.stopped:
                break
            try:
                out.append((b, run_range(b, e)))
            except BaseException as exc:
                run.fail(exc)
                break
        return out

    return [async_spawn(pool, work, ranges) for ranges in plans if ranges]


def _dynamic_tasks(pool, run, n, chunk, run_range, claims=None) -> list[TaskFuture]:
    cursor = [0]

    def claim():
        with run.lock:
            b = cursor[0]
            if b >= n or run.error is not None:
                return None
            e = min(b + chunk, n)
            cursor[0] = e
            if claims is not None:
                claims.append((b, e))
            return b, e

    def work():
        out = []
        while (r := claim()) is not None:
            try:
                out.append((r[0], run_range(*r)))
            except BaseException as exc:
                run.fail(exc)
                break
        return out

    tasks = min(pool.worker_count, -(-n // chunk))
    return [async_spawn(pool, work) for _ in range(tasks)]


def _schedule(pool: WorkerPool, chunker: ChunkPolicy | None, n: int, run_range) -> TaskFuture:
    """Run every chunk of [0, n); the future yields partials in ascending chunk order."""
    workers = pool.worker_count
    run = _Run()
    head: list[tuple[int, Any]] = []
    if chunker is None:
        chunker = StaticChunkSize(max(1, -(-n // (4 * workers))))

    if isinstance(chunker, AutoChunkSize):
        measured = calibration_size(n)
        start = chunker.timer()
        head.append((0, run_range(0, measured)))
        chunk = _chunk_from_timing(n, chunker.timer() - start, measured, chunker.target, workers)
        plan = compute_chunks_static(n - measured, chunk).shifted(measured)
        futs = _chunk_tasks(pool, run, _deal(plan, workers), run_range)
    elif isinstance(chunker, StaticChunkSize):
        futs = _chunk_tasks(pool, run, _deal(compute_chunks_static(n, chunker.chunk), workers), run_range)
    elif isinstance(chunker, DynamicChunkSize):
        futs = _dynamic_tasks(pool, run, n, chunker.chunk, run_range)
    else:
        raise TaskError(f"unknown chunk policy {chunker!r}", origin="algorithms")

    def gather(ready):
        parts = list(head)
        for f in ready.get():
            parts.extend(f.get())
        if run.error is not None:
            raise run.error
        parts.sort(key=lambda p: p[0])
        return [p for _, p in parts]

    return when_all(futs).then(gather)


def _deal(plan: ChunkPlan, workers: int) -> list[list[tuple[int, int]]]:
    return [list(plan.ranges[w::workers]) for w in range(min(workers, len(plan)))]


def _dispatch(pool, policy: ExecutionPolicy, chunker, n, run_range, finish):
    chunker = chunker if chunker is not None else policy.chunker
    if policy.mode is ExecutionMode.SEQ:
        return finish([run_range(0, n)] if n else [])
    pool = resolve_pool(pool)
    if n == 0:
        fut = make_ready_future([], pool).then(lambda f: finish(f.get()))
    else:
        fut = _schedule(pool, chunker, n, run_range).then(lambda f: finish(f.get()))
    if policy.mode is ExecutionMode.PAR_TASK:
        return fut
    return fut.get()


def par_for_each(
    pool: WorkerPool | None,
    policy: ExecutionPolicy,
    chunker: ChunkPolicy | None,
    data: Sequence,
    f: Callable,
    *,
    per_chunk: bool = False,
) -> None | TaskFuture[None]:
    """Replace every element with ``f(element)`` (or every chunk slice with ``f(slice)``).

    ``seq`` visits elements in index order; ``par`` and ``par_task`` give no
    ordering guarantee across chunks.  If ``f`` raises, chunks that have not
    started are skipped and the first error is raised (or stored in the
    returned future).
    """
    if per_chunk:
        def run_range(b, e):
            data[b:e] = f(data[b:e])
    else:
        def run_range(b, e):
            for i in range(b, e):
                data[i] = f(data[i])

    return _dispatch(pool, policy, chunker, len(data), run_range, lambda parts: None)


def par_reduce(
    pool: WorkerPool | None,
    policy: ExecutionPolicy,
    chunker: ChunkPolicy | None,
    data: Sequence,
    init: T,
    op: Callable[[T, T], T],
    *,
    chunk_reduce: Callable[[Sequence], T] | None = None,
) -> T | TaskFuture[T]:
    """Fold ``op`` over ``init`` and every element of ``data``.

    Each chunk is folded left to right starting from its first element (or
    by ``chunk_reduce(slice)`` when given); chunk partials are then combined
    as ``op(...op(op(init, p0), p1)..., pk)`` in ascending chunk order, so a
    fixed plan always yields the same bits.
    """
    if chunk_reduce is not None:
        def run_range(b, e):
            return chunk_reduce(data[b:e])
    else:
        def run_range(b, e):
            acc = data[b]
            for i in range(b + 1, e):
                acc = op(acc, data[i])
            return acc

    def finish(parts):
        acc = init
        for p in parts:
            acc = op(acc, p)
        return acc

    return _dispatch(pool, policy, chunker, len(data), run_range, finish)


def dynamic_dispatch(
    pool: WorkerPool | None, chunk: int, n: int, body: Callable[[int, int], Any]
) -> list[tuple[int, int]]:
    """Call ``body(begin, end)`` for chunks claimed from a shared cursor.

    Returns the claimed ranges in claim order.  Blocks until every chunk is
    done and re-raises the first error ``body`` raised.
    """
    _check_chunk(chunk)
    if n <= 0:
        return []
    pool = resolve_pool(pool)
    run = _Run()
    claims: list[tuple[int, int]] = []
    futs = _dynamic_tasks(pool, run, n, chunk, body, claims)
    for f in when_all(futs).get():
        f.get()
    if run.error is not None:
        raise run.error
    return claims
