"""Futures with continuations, group joins and ``await`` support.

A :class:`TaskFuture` is single-consumer: ``get``, ``then`` and ``when_all``
each take ownership of the result.  Call :meth:`TaskFuture.share` for a
future that can be read any number of times.

Continuations are always submitted to a pool as fresh tasks, never run inline
by whoever completed the producer, so chains of any length run with bounded
stack depth.
"""

from __future__ import annotations

import logging
import threading
from typing import Any, Callable, Coroutine, Generator, Generic, Iterable, TypeVar

from .errors import TaskError
from .runtime import WorkerPool, _deadline, _remaining, current_worker, resolve_pool

T = TypeVar("T")
U = TypeVar("U")

log = logging.getLogger(__name__)

_PENDING, _VALUE, _ERROR = "pending", "value", "error"


class SharedState(Generic[T]):
    """Completion slot shared by a promise and its futures."""

    __slots__ = ("_lock", "_status", "_result", "_callbacks")

    def __init__(self):
        self._lock = threading.Lock()
        self._status = _PENDING
        self._result: Any = None
        self._callbacks: list[Callable[[], None]] | None = []

    @property
    def status(self) -> str:
        return self._status

    def done(self) -> bool:
        return self._status != _PENDING

    def set_value(self, value: T) -> None:
        self._complete(_VALUE, value)

    def set_error(self, error: BaseException) -> None:
        self._complete(_ERROR, error)

    def _complete(self, status: str, result: Any) -> None:
        with self._lock:
            if self._status != _PENDING:
                raise TaskError("shared state is already satisfied", origin="promise")
            self._result = result
            self._status = status
            callbacks, self._callbacks = self._callbacks, None
        for cb in callbacks:
            _run_callback(cb)

    def add_callback(self, cb: Callable[[], None]) -> None:
        """Run ``cb`` once the state is complete (immediately if it already is)."""
        with self._lock:
            if self._status == _PENDING:
                self._callbacks.append(cb)
                return
        _run_callback(cb)

    def result(self) -> T:
        if self._status == _VALUE:
            return self._result
        if self._status == _ERROR:
            raise self._result
        raise TaskError("result read from a pending state", origin="future")

    def exception(self) -> BaseException | None:
        return self._result if self._status == _ERROR else None

    def wait(self, timeout: float | None = None) -> None:
        """Block until complete; workers help their pool, other threads park."""
        if self.done():
            return
        me = current_worker()
        if me is not None:
            pool = me[0]
            self.add_callback(pool.wake)
            pool.help_while_waiting(self.done, timeout)
            return
        event = threading.Event()
        self.add_callback(event.set)
        deadline = _deadline(timeout)
        while not event.wait(_remaining(deadline, "future wait")):
            pass


def _run_callback(cb: Callable[[], None]) -> None:
    try:
        cb()
    except BaseException:
        log.exception("completion callback %r failed", cb)


class TaskFuture(Generic[T]):
    """Single-consumer handle on a value that may not be computed yet."""

    __slots__ = ("_state", "_pool", "_consumed")

    def __init__(self, state: SharedState[T], pool: WorkerPool | None = None):
        self._state = state
        self._pool = pool
        self._consumed = False

    def __repr__(self) -> str:
        flag = ", consumed" if self._consumed else ""
        return f"<TaskFuture {self._state.status}{flag}>"

    @property
    def valid(self) -> bool:
        return not self._consumed

    def is_ready(self) -> bool:
        return self._state.done()

    def has_value(self) -> bool:
        return self._state.status == _VALUE

    def has_exception(self) -> bool:
        return self._state.status == _ERROR

    def wait(self, timeout: float | None = None) -> None:
        self._check_valid("wait")
        self._state.wait(timeout)

    def get(self, timeout: float | None = None) -> T:
        """Return the value or re-raise the stored error; consumes the future."""
        self._consume("get")
        self._state.wait(timeout)
        return self._state.result()

    def then(self, cont: Callable[[TaskFuture[T]], U]) -> TaskFuture[U]:
        """Attach ``cont``; it receives this future's result as a ready future."""
        self._consume("then")
        return _attach(self._state, self._pool, cont, lambda: TaskFuture(self._state, self._pool))

    def share(self) -> SharedFuture[T]:
        self._consume("share")
        return SharedFuture(self._state, self._pool)

    def __await__(self) -> Generator[SharedState, None, T]:
        return _await_state(self, self._state)

    def _check_valid(self, what: str) -> None:
        if self._consumed:
            raise TaskError(f"{what}() on a consumed future", origin="future")

    def _consume(self, what: str) -> None:
        self._check_valid(what)
        self._consumed = True


class SharedFuture(Generic[T]):
    """Multi-consumer view of a completion; ``get`` and ``then`` may repeat."""

    __slots__ = ("_state", "_pool")

    def __init__(self, state: SharedState[T], pool: WorkerPool | None = None):
        self._state = state
        self._pool = pool

    def is_ready(self) -> bool:
        return self._state.done()

    def get(self, timeout: float | None = None) -> T:
        self._state.wait(timeout)
        return self._state.result()

    def then(self, cont: Callable[[SharedFuture[T]], U]) -> TaskFuture[U]:
        return _attach(self._state, self._pool, cont, lambda: self)

    def __await__(self) -> Generator[SharedState, None, T]:
        return _await_state(None, self._state)


def _attach(state: SharedState, pool: WorkerPool | None, cont: Callable, ready_view: Callable) -> TaskFuture:
    pool = resolve_pool(pool)
    promise: Promise = Promise(pool)

    def run_continuation():
        try:
            result = cont(ready_view())
        except BaseException as exc:
            promise.set_error(exc)
        else:
            promise.set_value(result)

    def schedule():
        try:
            pool.submit(run_continuation)
        except TaskError as exc:
            promise.set_error(exc)

    state.add_callback(schedule)
    return promise.get_future()


class Promise(Generic[T]):
    """Producer side of a :class:`SharedState`."""

    __slots__ = ("_state", "_pool", "_future_retrieved")

    def __init__(self, pool: WorkerPool | None = None):
        self._state: SharedState[T] = SharedState()
        self._pool = pool
        self._future_retrieved = False

    def get_future(self) -> TaskFuture[T]:
        if self._future_retrieved:
            raise TaskError("future already retrieved from this promise", origin="promise")
        self._future_retrieved = True
        return TaskFuture(self._state, self._pool)

    def set_value(self, value: T) -> None:
        self._state.set_value(value)

    def set_error(self, error: BaseException) -> None:
        self._state.set_error(error)


PromiseHandle = Promise


def async_spawn(pool: WorkerPool | None, fn: Callable[..., T], *args: Any) -> TaskFuture[T]:
    """Run ``fn(*args)`` as a pool task; errors it raises land in the future."""
    pool = resolve_pool(pool)
    promise: Promise[T] = Promise(pool)

    def body():
        try:
            value = fn(*args)
        except BaseException as exc:
            promise.set_error(exc)
        else:
            promise.set_value(value)

    pool.submit(body)
    return promise.get_future()


def make_ready_future(value: T, pool: WorkerPool | None = None) -> TaskFuture[T]:
    promise: Promise[T] = Promise(pool)
    promise.set_value(value)
    return promise.get_future()


def make_exceptional_future(error: BaseException, pool: WorkerPool | None = None) -> TaskFuture:
    promise: Promise = Promise(pool)
    promise.set_error(error)
    return promise.get_future()


def when_all(futures: Iterable[TaskFuture[T]]) -> TaskFuture[list[TaskFuture[T]]]:
    """Future that is ready once every input is ready.

    Its value is a list of ready futures, one per input and in input order.
    Input errors do not fail the group; they surface when the corresponding
    element is read.
    """
    futs = list(futures)
    for f in futs:
        f._check_valid("when_all")
    for f in futs:
        f._consumed = True
    pool = next((f._pool for f in futs if f._pool is not None), None)
    promise: Promise[list[TaskFuture[T]]] = Promise(pool)
    if not futs:
        promise.set_value([])
        return promise.get_future()

    lock = threading.Lock()
    remaining = [len(futs)]

    def one_done():
        with lock:
            remaining[0] -= 1
            last = remaining[0] == 0
        if last:
            promise.set_value([TaskFuture(f._state, f._pool) for f in futs])

    for f in futs:
        f._state.add_callback(one_done)
    return promise.get_future()


class _Awaitable(Generic[T]):
    __slots__ = ("_future",)

    def __init__(self, future: TaskFuture[T] | SharedFuture[T]):
        self._future = future

    def __await__(self) -> Generator[SharedState, None, T]:
        return self._future.__await__()


def as_awaitable(future: TaskFuture[T] | SharedFuture[T]) -> _Awaitable[T]:
    """Wrap ``future`` for ``await`` inside a coroutine run by :func:`spawn_coroutine`."""
    if isinstance(future, TaskFuture):
        future._check_valid("as_awaitable")
    return _Awaitable(future)


def _await_state(owner: TaskFuture | None, state: SharedState[T]) -> Generator[SharedState, None, T]:
    if owner is not None:
        owner._consume("await")
    if not state.done():
        # Hand the state to the driver; it resumes us once the state completes.
        yield state
    return state.result()


def spawn_coroutine(pool: WorkerPool | None, coro: Coroutine[Any, Any, T]) -> TaskFuture[T]:
    """Drive ``coro`` on ``pool``; the returned future holds its return value.

    Each ``await`` on a pending future suspends the coroutine and reschedules
    it as a new task when that future completes, so no worker ever blocks.
    """
    pool = resolve_pool(pool)
    promise: Promise[T] = Promise(pool)

    def step(throw: BaseException | None = None) -> None:
        try:
            awaited = coro.send(None) if throw is None else coro.throw(throw)
        except StopIteration as stop:
            promise.set_value(stop.value)
            return
        except BaseException as exc:
            promise.set_error(exc)
            return
        if not isinstance(awaited, SharedState):
            err = TaskError(f"cannot await {awaited!r} in a taskrt coroutine", origin="future")
            pool.submit(lambda: step(err))
            return
        awaited.add_callback(lambda: pool.submit(step))

    pool.submit(step)
    return promise.get_future()
