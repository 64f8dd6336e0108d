"""Exception hierarchy shared across the package."""

from __future__ import annotations


class EnsembleError(Exception):
    """Base class for every error raised by ensemblekit."""


class ZeroSlots(EnsembleError):
    pass


class DuplicateTaskId(EnsembleError):
    pass


class IllegalTransition(EnsembleError):
    pass


class DuplicateKernelName(EnsembleError):
    pass


class UnknownKernel(EnsembleError):
    pass


class BadArgs(EnsembleError):
    pass


class InvalidSpec(EnsembleError):
    pass


class UnknownTask(EnsembleError):
    pass


class TaskNotDone(EnsembleError):
    pass


class InsufficientSlots(EnsembleError):
    pass


class IncompleteLog(EnsembleError):
    pass


class MixedModes(EnsembleError):
    pass


class ParseError(EnsembleError):
    """Spec file could not be parsed; ``line`` and ``field`` locate the fault."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class RunAborted(EnsembleError):
    """A run stopped before the pattern finished.

    The partial event log is kept on ``log`` so callers can still write it out.
    """

    def __init__(self, message: str, log=None):
        super().__init__(message)
        self.log = log


class TaskFailedPermanently(RunAborted):
    pass


class WalltimeExceeded(RunAborted):
    pass


class RunCancelled(RunAborted):
    pass
