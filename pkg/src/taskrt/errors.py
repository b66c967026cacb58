"""Error types shared by every taskrt module."""

from __future__ import annotations


class TaskError(Exception):
    """Runtime contract violation.

    ``origin`` names the component that raised it (``"pool"``, ``"future"``,
    ``"promise"``, ``"sender"``, ``"algorithms"``, ...).  Errors raised by user
    closures are never wrapped; they propagate as the original exception.
    """

    def __init__(self, message: str, origin: str = "taskrt"):
        super().__init__(message)
        self.message = message
        self.origin = origin

    def __str__(self) -> str:
        return f"[{self.origin}] {self.message}"


class WatchdogTimeout(TaskError):
    """A wait exceeded the configured watchdog deadline."""

    def __init__(self, message: str):
        super().__init__(message, origin="watchdog")
