"""Lazy sender pipelines completing on a value, error or stopped channel.

Building a pipeline only records stages::

    s = schedule(sch) | bulk(4, body) | then(combine)

Nothing runs until :func:`sync_wait`, :func:`start_detached` or
:func:`ensure_started` is called.  Receivers are internal: each stage wraps
the downstream receiver and forwards one of ``set_value(*values)``,
``set_error(exc)`` or ``set_stopped()``.

Values travel as argument tuples.  ``schedule`` completes with no values, so
``then`` after it calls ``f()``; a ``then`` callable returning ``None``
likewise completes with no values.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Callable, Generic, TypeVar

from .algorithms import compute_chunks_static
from .errors import TaskError
from .futures import SharedState
from .runtime import WorkerPool

T = TypeVar("T")

log = logging.getLogger(__name__)

VALUE, ERROR, STOPPED = "value", "error", "stopped"


@dataclass(frozen=True)
class Completion(Generic[T]):
    """The single signal a started pipeline delivered."""

    channel: str
    value: Any = None
    error: BaseException | None = None

    @property
    def ok(self) -> bool:
        return self.channel == VALUE

    @property
    def stopped(self) -> bool:
        return self.channel == STOPPED

    def unwrap(self) -> T:
        if self.channel == VALUE:
            return self.value
        if self.channel == ERROR:
            raise self.error
        raise TaskError("pipeline completed on the stopped channel", origin="sender")


def _pack(values: tuple) -> Any:
    if not values:
        return None
    return values[0] if len(values) == 1 else values


class StopSource:
    """One-shot stop request observed by stages before they run."""

    def __init__(self):
        self._lock = threading.Lock()
        self._requested = False

    @property
    def stop_requested(self) -> bool:
        return self._requested

    def request_stop(self) -> bool:
        """Returns True for the call that actually made the request."""
        with self._lock:
            first = not self._requested
            self._requested = True
        return first


@dataclass(frozen=True)
class SchedulerHandle:
    pool: WorkerPool
    label: str = "thread_pool"

    def schedule(self) -> Sender:
        return schedule(self)


def thread_pool_scheduler(pool: WorkerPool) -> SchedulerHandle:
    return SchedulerHandle(pool, "thread_pool")


class _Receiver:
    __slots__ = ("stop",)

    def __init__(self, stop: StopSource | None):
        self.stop = stop

    @property
    def stop_requested(self) -> bool:
        return self.stop is not None and self.stop.stop_requested

    def set_value(self, *values: Any) -> None:
        raise NotImplementedError

    def set_error(self, error: BaseException) -> None:
        raise NotImplementedError

    def set_stopped(self) -> None:
        raise NotImplementedError


class _Forwarding(_Receiver):
    __slots__ = ("out",)

    def __init__(self, out: _Receiver):
        super().__init__(out.stop)
        self.out = out

    def set_error(self, error):
        self.out.set_error(error)

    def set_stopped(self):
        self.out.set_stopped()


class _Terminal(_Receiver):
    """Stores the pipeline's completion in a shared state (exactly once)."""

    __slots__ = ("state",)

    def __init__(self, stop: StopSource | None):
        super().__init__(stop)
        self.state: SharedState[Completion] = SharedState()

    def set_value(self, *values):
        self.state.set_value(Completion(VALUE, value=_pack(values)))

    def set_error(self, error):
        self.state.set_value(Completion(ERROR, error=error))

    def set_stopped(self):
        self.state.set_value(Completion(STOPPED))


class Sender(Generic[T]):
    """A lazily composed pipeline stage."""

    stage = "sender"

    def __init__(self, upstream: Sender | None = None):
        self.upstream = upstream
        self._started = False

    @property
    def scheduler(self) -> SchedulerHandle | None:
        """Scheduler this stage completes on, if known."""
        return self.upstream.scheduler if self.upstream is not None else None

    @property
    def started(self) -> bool:
        return self._started

    def __or__(self, adaptor: Callable[[Sender], Sender]) -> Sender:
        return pipe(self, adaptor)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.stage}>"

    def connect(self, receiver: _Receiver) -> None:
        """Start this stage, delivering its completion to ``receiver``."""
        if self._started:
            raise TaskError(f"{self.stage} sender started twice", origin="sender")
        self._started = True
        self._start(receiver)

    def _start(self, receiver: _Receiver) -> None:
        raise NotImplementedError


class _Just(Sender):
    stage = "just"

    def __init__(self, values: tuple):
        super().__init__()
        self.values = values

    def _start(self, receiver):
        if receiver.stop_requested:
            receiver.set_stopped()
        else:
            receiver.set_value(*self.values)


class _JustError(Sender):
    stage = "just_error"

    def __init__(self, error: BaseException):
        super().__init__()
        self.error = error

    def _start(self, receiver):
        receiver.set_error(self.error)


class _JustStopped(Sender):
    stage = "just_stopped"

    def _start(self, receiver):
        receiver.set_stopped()


class _Schedule(Sender):
    stage = "schedule"

    def __init__(self, sch: SchedulerHandle):
        super().__init__()
        self.sch = sch

    @property
    def scheduler(self):
        return self.sch

    def _start(self, receiver):
        def run():
            if receiver.stop_requested:
                receiver.set_stopped()
            else:
                receiver.set_value()

        try:
            self.sch.pool.submit(run)
        except TaskError as exc:
            receiver.set_error(exc)


class _ThenReceiver(_Forwarding):
    __slots__ = ("fn",)

    def __init__(self, out, fn):
        super().__init__(out)
        self.fn = fn

    def set_value(self, *values):
        if self.stop_requested:
            self.out.set_stopped()
            return
        try:
            result = self.fn(*values)
        except BaseException as exc:
            self.out.set_error(exc)
            return
        if result is None:
            self.out.set_value()
        else:
            self.out.set_value(result)


class _Then(Sender):
    stage = "then"

    def __init__(self, upstream: Sender, fn: Callable):
        super().__init__(upstream)
        self.fn = fn

    def _start(self, receiver):
        self.upstream.connect(_ThenReceiver(receiver, self.fn))


class _BulkReceiver(_Forwarding):
    __slots__ = ("shape", "body", "pool")

    def __init__(self, out, shape, body, pool):
        super().__init__(out)
        self.shape = shape
        self.body = body
        self.pool = pool

    def set_value(self, *values):
        if self.stop_requested:
            self.out.set_stopped()
            return
        if self.shape == 0:
            self.out.set_value(*values)
            return
        lock = threading.Lock()
        first_error: list[BaseException] = []

        def run(begin, end):
            for i in range(begin, end):
                try:
                    self.body(i, *values)
                except BaseException as exc:
                    with lock:
                        if not first_error:
                            first_error.append(exc)

        if self.pool is None:
            run(0, self.shape)
            self._finish(values, first_error)
            return

        workers = self.pool.worker_count
        if self.shape <= 4 * workers:
            ranges = [(i, i + 1) for i in range(self.shape)]
        else:
            ranges = list(compute_chunks_static(self.shape, -(-self.shape // (4 * workers))))
        remaining = [len(ranges)]

        def piece(begin, end):
            run(begin, end)
            with lock:
                remaining[0] -= 1
                last = remaining[0] == 0
            if last:
                self._finish(values, first_error)

        for begin, end in ranges:
            try:
                self.pool.submit(lambda b=begin, e=end: piece(b, e))
            except TaskError as exc:
                with lock:
                    if not first_error:
                        first_error.append(exc)
                piece(begin, begin)

    def _finish(self, values, first_error):
        if first_error:
            self.out.set_error(first_error[0])
        else:
            self.out.set_value(*values)


def _check_shape(shape: int) -> None:
    if isinstance(shape, bool) or not isinstance(shape, int) or shape < 0:
        raise TaskError(f"bulk shape must be a non-negative int, got {shape!r}", origin="sender")


class _Bulk(Sender):
    stage = "bulk"

    def __init__(self, upstream: Sender, shape: int, body: Callable):
        _check_shape(shape)
        super().__init__(upstream)
        self.shape = shape
        self.body = body

    def _start(self, receiver):
        sch = self.upstream.scheduler
        pool = sch.pool if sch is not None else None
        self.upstream.connect(_BulkReceiver(receiver, self.shape, self.body, pool))


class _EnsureStarted(Sender):
    stage = "ensure_started"

    def __init__(self, memo: SharedState[Completion], sch: SchedulerHandle | None):
        super().__init__()
        self.memo = memo
        self.sch = sch

    @property
    def scheduler(self):
        return self.sch

    def _start(self, receiver):
        self.memo.add_callback(lambda: _deliver(receiver, self.memo.result()))


def _deliver(receiver: _Receiver, done: Completion) -> None:
    if done.channel == VALUE:
        if done.value is None:
            receiver.set_value()
        else:
            receiver.set_value(done.value)
    elif done.channel == ERROR:
        receiver.set_error(done.error)
    else:
        receiver.set_stopped()


class AnySender(Sender[T]):
    """Type-erased sender; lets recursive code return one uniform type."""

    stage = "any_sender"

    def __init__(self, inner: Sender[T]):
        super().__init__(inner)

    def _start(self, receiver):
        self.upstream.connect(receiver)


def schedule(sch: SchedulerHandle) -> Sender[None]:
    return _Schedule(sch)


def just(*values: Any) -> Sender:
    return _Just(values)


def just_error(error: BaseException) -> Sender:
    return _JustError(error)


def just_stopped() -> Sender:
    return _JustStopped()


def then(*args):
    """``then(up, f)`` or the pipeable ``then(f)``."""
    if len(args) == 2 and isinstance(args[0], Sender):
        return _Then(*args)
    if len(args) == 1 and callable(args[0]):
        fn = args[0]
        return lambda up: _Then(up, fn)
    raise TypeError("then expects (sender, fn) or (fn)")


def bulk(*args):
    """``bulk(up, shape, body)`` or the pipeable ``bulk(shape, body)``.

    ``body(i, *values)`` runs once per ``i`` in ``range(shape)``, possibly
    concurrently; the stage then forwards the upstream values.
    """
    if len(args) == 3 and isinstance(args[0], Sender):
        return _Bulk(*args)
    if len(args) == 2:
        shape, body = args
        _check_shape(shape)
        return lambda up: _Bulk(up, shape, body)
    raise TypeError("bulk expects (sender, shape, body) or (shape, body)")


def pipe(up: Sender, adaptor: Callable[[Sender], Sender]) -> Sender:
    if not callable(adaptor):
        raise TypeError(f"cannot pipe a sender into {adaptor!r}")
    out = adaptor(up)
    if not isinstance(out, Sender):
        raise TypeError(f"adaptor {adaptor!r} did not produce a sender")
    return out


def erase(s: Sender[T]) -> AnySender[T]:
    return s if isinstance(s, AnySender) else AnySender(s)


def sync_wait(s: Sender[T], stop: StopSource | None = None, timeout: float | None = None) -> Completion[T]:
    """Start ``s`` and wait for its completion signal.

    Errors and stop requests come back as channels of the returned
    :class:`Completion`; only starting an already started sender raises.
    """
    receiver = _Terminal(stop)
    s.connect(receiver)
    receiver.state.wait(timeout)
    return receiver.state.result()


def _log_error(exc: BaseException) -> None:
    log.error("detached pipeline failed", exc_info=exc)


class _Detached(_Receiver):
    __slots__ = ("sink",)

    def __init__(self, stop, sink):
        super().__init__(stop)
        self.sink = sink

    def set_value(self, *values):
        pass

    def set_error(self, error):
        self.sink(error)

    def set_stopped(self):
        pass


def start_detached(
    s: Sender, stop: StopSource | None = None, error_sink: Callable[[BaseException], Any] | None = None
) -> None:
    """Start ``s`` and discard its result; errors go to ``error_sink`` (default: logging)."""
    s.connect(_Detached(stop, error_sink or _log_error))


def ensure_started(s: Sender[T], stop: StopSource | None = None) -> Sender[T]:
    """Start ``s`` now; the returned sender replays its completion when started."""
    receiver = _Terminal(stop)
    sch = s.scheduler
    s.connect(receiver)
    return _EnsureStarted(receiver.state, sch)
