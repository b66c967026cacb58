"""Shared-memory task-parallel runtime: futures, parallel algorithms, senders."""

from .algorithms import (
    AutoChunkSize,
    ChunkPlan,
    DynamicChunkSize,
    ExecutionPolicy,
    StaticChunkSize,
    calibrate_auto_chunk,
    compute_chunks_static,
    dynamic_dispatch,
    par,
    par_for_each,
    par_reduce,
    par_task,
    seq,
    task,
)
from .errors import TaskError, WatchdogTimeout
from .futures import (
    Promise,
    SharedFuture,
    TaskFuture,
    as_awaitable,
    async_spawn,
    make_exceptional_future,
    make_ready_future,
    spawn_coroutine,
    when_all,
)
from .runtime import QueueDiscipline, RuntimeConfig, TaskUnit, WorkerPool, default_pool, set_watchdog
from .senders import (
    AnySender,
    Completion,
    SchedulerHandle,
    Sender,
    StopSource,
    bulk,
    ensure_started,
    erase,
    just,
    just_error,
    just_stopped,
    schedule,
    start_detached,
    sync_wait,
    then,
    thread_pool_scheduler,
)

__version__ = "0.1.0"

__all__ = [
    "AnySender",
    "as_awaitable",
    "async_spawn",
    "AutoChunkSize",
    "bulk",
    "calibrate_auto_chunk",
    "ChunkPlan",
    "Completion",
    "compute_chunks_static",
    "default_pool",
    "dynamic_dispatch",
    "DynamicChunkSize",
    "ensure_started",
    "erase",
    "ExecutionPolicy",
    "just",
    "just_error",
    "just_stopped",
    "make_exceptional_future",
    "make_ready_future",
    "par",
    "par_for_each",
    "par_reduce",
    "par_task",
    "Promise",
    "QueueDiscipline",
    "RuntimeConfig",
    "schedule",
    "SchedulerHandle",
    "Sender",
    "seq",
    "set_watchdog",
    "SharedFuture",
    "spawn_coroutine",
    "start_detached",
    "StaticChunkSize",
    "StopSource",
    "sync_wait",
    "task",
    "TaskError",
    "TaskFuture",
    "TaskUnit",
    "then",
    "thread_pool_scheduler",
    "WatchdogTimeout",
    "when_all",
    "WorkerPool",
]

