"""Worker pool with cooperative waiting.

Tasks are run-to-completion closures executed by a fixed set of OS threads.
Each worker owns a double-ended queue: it pushes and pops at the front, idle
workers steal from the back, and submissions from outside the pool land in a
shared FIFO injection queue.  A worker that has to wait for something never
parks; it keeps executing queued tasks until its predicate holds
(:meth:`WorkerPool.help_while_waiting`).  That is what keeps a one-worker
pool from deadlocking on a future whose producer is still queued.
"""

from __future__ import annotations

import atexit
import enum
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .errors import TaskError, WatchdogTimeout

log = logging.getLogger(__name__)

WORKERS_ENV = "TASKRT_WORKERS"
WATCHDOG_ENV = "TASKRT_WATCHDOG"


def default_worker_count() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            count = int(value)
        except ValueError:
            raise TaskError(f"{WORKERS_ENV}={value!r} is not an integer", origin="pool") from None
        if count < 1:
            raise TaskError(f"{WORKERS_ENV} must be >= 1, got {count}", origin="pool")
        return count
    return os.cpu_count() or 1


def _env_watchdog() -> float | None:
    value = os.environ.get(WATCHDOG_ENV)
    if not value:
        return None
    seconds = float(value)
    return seconds if seconds > 0 else None


_watchdog_seconds: float | None = _env_watchdog()


def set_watchdog(seconds: float | None) -> None:
    """Bound every blocking wait by ``seconds``; ``None`` disables the bound.

    A wait that outlives the bound raises :class:`WatchdogTimeout`, which turns
    a hang into a test failure.
    """
    global _watchdog_seconds
    if seconds is not None and seconds <= 0:
        raise ValueError("watchdog must be positive or None")
    _watchdog_seconds = seconds


def get_watchdog() -> float | None:
    return _watchdog_seconds


def _deadline(timeout: float | None) -> float | None:
    if timeout is None:
        timeout = _watchdog_seconds
    return None if timeout is None else time.monotonic() + timeout


def _remaining(deadline: float | None, what: str) -> float | None:
    if deadline is None:
        return None
    left = deadline - time.monotonic()
    if left <= 0:
        raise WatchdogTimeout(f"{what} did not complete before the watchdog deadline")
    return left


class QueueDiscipline(str, enum.Enum):
    WORK_STEALING = "work_stealing"
    SINGLE_SHARED = "single_shared"


@dataclass(frozen=True)
class RuntimeConfig:
    worker_count: int = field(default_factory=default_worker_count)
    queue_discipline: QueueDiscipline = QueueDiscipline.WORK_STEALING

    def __post_init__(self):
        if isinstance(self.worker_count, bool) or not isinstance(self.worker_count, int):
            raise TaskError(f"worker_count must be an int, got {self.worker_count!r}", origin="pool")
        if self.worker_count < 1:
            raise TaskError(f"worker_count must be >= 1, got {self.worker_count}", origin="pool")
        object.__setattr__(self, "queue_discipline", QueueDiscipline(self.queue_discipline))


class TaskState(enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    FINISHED = "finished"


class TaskUnit:
    """A deferred computation that runs exactly once."""

    __slots__ = ("body", "state")

    def __init__(self, body: Callable[[], object]):
        self.body = body
        self.state = TaskState.PENDING

    def run(self) -> None:
        if self.state is not TaskState.PENDING:
            raise TaskError(f"task already {self.state.value}", origin="task")
        self.state = TaskState.RUNNING
        try:
            self.body()
        finally:
            self.state = TaskState.FINISHED

    def __repr__(self) -> str:
        return f"TaskUnit({getattr(self.body, '__name__', self.body)!r}, {self.state.value})"


_tls = threading.local()


def current_worker() -> tuple[WorkerPool, int] | None:
    """``(pool, index)`` when called on a pool worker thread, else ``None``."""
    return getattr(_tls, "worker", None)


def current_pool() -> WorkerPool | None:
    me = current_worker()
    return me[0] if me is not None else None


_RUNNING, _DRAINING, _CLOSED = "running", "draining", "closed"


class WorkerPool:
    """Fixed set of worker threads executing :class:`TaskUnit` objects."""

    def __init__(self, config: RuntimeConfig | None = None, *, name: str = "taskrt"):
        self.config = config if config is not None else RuntimeConfig()
        self.name = name
        workers = self.config.worker_count
        self._lock = threading.Lock()
        # _work: idle workers and helping workers; _idle: shutdown waiter;
        # _wake: external threads waiting on a predicate.
        self._work = threading.Condition(self._lock)
        self._idle = threading.Condition(self._lock)
        self._wake = threading.Condition(self._lock)
        self._injection: deque[TaskUnit] = deque()
        if self.config.queue_discipline is QueueDiscipline.WORK_STEALING:
            self._local: list[deque[TaskUnit]] = [deque() for _ in range(workers)]
        else:
            self._local = []
        self._unfinished = 0
        self._executed = 0
        self._state = _RUNNING
        self._threads = [
            threading.Thread(target=self._worker_main, args=(i,), name=f"{name}-{i}", daemon=True)
            for i in range(workers)
        ]
        for t in self._threads:
            t.start()

    def __repr__(self) -> str:
        return f"WorkerPool(name={self.name!r}, workers={self.worker_count}, state={self._state})"

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    @property
    def worker_count(self) -> int:
        return self.config.worker_count

    @property
    def is_shutdown(self) -> bool:
        return self._state != _RUNNING

    @property
    def pending_count(self) -> int:
        """Tasks submitted but not yet finished."""
        with self._lock:
            return self._unfinished

    @property
    def executed_count(self) -> int:
        with self._lock:
            return self._executed

    def submit(self, task: TaskUnit | Callable[[], object]) -> TaskUnit:
        if not isinstance(task, TaskUnit):
            task = TaskUnit(task)
        me = current_worker()
        on_worker = me is not None and me[0] is self
        with self._lock:
            # While draining, running tasks may still spawn follow-up work.
            if self._state == _CLOSED or (self._state == _DRAINING and not on_worker):
                raise TaskError(f"submit to shut-down pool {self.name!r}", origin="pool")
            self._unfinished += 1
            if on_worker and self._local:
                self._local[me[1]].appendleft(task)
            else:
                self._injection.append(task)
            self._work.notify()
        return task

    def help_while_waiting(self, ready: Callable[[], bool], timeout: float | None = None) -> int:
        """Return once ``ready()`` holds, running queued tasks meanwhile.

        Returns the number of tasks this call executed.  ``ready`` is evaluated
        with the pool lock held, so it must be cheap and must not touch the
        pool.  A thread that is not one of this pool's workers parks instead
        of helping.  Whoever makes ``ready`` true should call :meth:`wake`.
        """
        deadline = _deadline(timeout)
        me = current_worker()
        if me is None or me[0] is not self:
            with self._lock:
                while not ready():
                    left = _remaining(deadline, "wait")
                    self._wake.wait(0.05 if left is None else min(left, 0.05))
            return 0
        index = me[1]
        ran = 0
        while True:
            with self._lock:
                while True:
                    if ready():
                        return ran
                    task = self._take_locked(index)
                    if task is not None:
                        break
                    self._work.wait(_remaining(deadline, "wait"))
            self._execute(task)
            ran += 1

    def wait_idle(self, timeout: float | None = None) -> None:
        """Block until no submitted task is pending or running."""
        me = current_worker()
        if me is not None and me[0] is self:
            raise TaskError("wait_idle called from one of the pool's own workers", origin="pool")
        deadline = _deadline(timeout)
        with self._lock:
            while self._unfinished:
                self._idle.wait(_remaining(deadline, "wait_idle"))

    def wake(self) -> None:
        """Re-check the predicates of every waiting thread."""
        with self._lock:
            self._work.notify_all()
            self._wake.notify_all()

    def shutdown(self) -> None:
        """Wait for every submitted task to finish, then stop the workers.

        Calling it again is a no-op.  Must not be called from a worker.
        """
        me = current_worker()
        if me is not None and me[0] is self:
            raise TaskError("shutdown called from one of the pool's own workers", origin="pool")
        with self._lock:
            if self._state == _CLOSED:
                return
            self._state = _DRAINING
            while self._unfinished:
                self._idle.wait()
            self._state = _CLOSED
            self._work.notify_all()
        for t in self._threads:
            t.join()

    def _take_locked(self, index: int) -> TaskUnit | None:
        if self._local:
            own = self._local[index]
            if own:
                return own.popleft()
        if self._injection:
            return self._injection.popleft()
        count = len(self._local)
        for offset in range(1, count):
            victim = self._local[(index + offset) % count]
            if victim:
                return victim.pop()
        return None

    def _execute(self, task: TaskUnit) -> None:
        try:
            task.run()
        except BaseException:
            log.exception("unhandled error in task %r on pool %s", task, self.name)
        with self._lock:
            self._executed += 1
            self._unfinished -= 1
            if not self._unfinished:
                self._idle.notify_all()

    def _worker_main(self, index: int) -> None:
        _tls.worker = (self, index)
        while True:
            with self._lock:
                task = self._take_locked(index)
                while task is None:
                    if self._state == _CLOSED:
                        return
                    self._work.wait()
                    task = self._take_locked(index)
            self._execute(task)


def pool_create(config: RuntimeConfig) -> WorkerPool:
    return WorkerPool(config)


_default_pool: WorkerPool | None = None
_default_lock = threading.Lock()


def default_pool() -> WorkerPool:
    """Process-wide pool sized from ``TASKRT_WORKERS`` (default: CPU count)."""
    global _default_pool
    with _default_lock:
        if _default_pool is None or _default_pool.is_shutdown:
            _default_pool = WorkerPool(RuntimeConfig(), name="taskrt-default")
        return _default_pool


def resolve_pool(pool: WorkerPool | None = None) -> WorkerPool:
    if pool is not None:
        return pool
    return current_pool() or default_pool()


@atexit.register
def _shutdown_default() -> None:
    if _default_pool is not None and current_worker() is None:
        _default_pool.shutdown()
