"""Domain types shared by every module: tasks, lifecycle states and resource requests.

Timestamps are seconds from run start. The simulated backend uses
:class:`fractions.Fraction` so that virtual-time arithmetic is exact; the
local-process backend uses ``float``. Both are plain numbers to the rest of
the code.
"""

from __future__ import annotations

import dataclasses
import enum
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from pathlib import PurePosixPath
from typing import Union

from .errors import DuplicateTaskId, IllegalTransition, InvalidSpec, ZeroSlots

Time = Union[float, Fraction]

DEFAULT_RETRY_LIMIT = 1


class TaskState(str, enum.Enum):
    PENDING = "Pending"
    SCHEDULED = "Scheduled"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


LEGAL_TRANSITIONS: dict[TaskState, frozenset[TaskState]] = {
    TaskState.PENDING: frozenset({TaskState.SCHEDULED}),
    TaskState.SCHEDULED: frozenset({TaskState.RUNNING}),
    TaskState.RUNNING: frozenset({TaskState.DONE, TaskState.FAILED}),
    TaskState.DONE: frozenset(),
    # retry path only
    TaskState.FAILED: frozenset({TaskState.SCHEDULED}),
}


class BackendKind(str, enum.Enum):
    LOCAL_PROCESS = "local"
    SIMULATED = "simulated"


def exact(value) -> Fraction:
    """Exact rational for a user-supplied number (``0.1`` becomes ``1/10``)."""
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def task_id_for(iteration: int, stage: int, member: int) -> str:
    """Zero-padded id; lexicographic order matches (iteration, stage, member)."""
    return f"i{iteration:04d}-s{stage:02d}-m{member:05d}"


@dataclass(frozen=True)
class TaskDescription:
    """A single unit of execution and its resource demand.

    ``args`` holds ``key=value`` tokens in order; ``role`` names the pattern
    stage the task belongs to (``simulation``, ``exchange``, ...).
    """

    task_id: str
    kernel: str
    args: tuple[str, ...] = ()
    slots_required: int = 1
    stage_index: int = 0
    member_index: int = 0
    iteration: int = 0
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    role: str = ""

    @property
    def key(self) -> tuple[int, int, int]:
        """Identity within one pattern instance, in tie-break order."""
        return (self.iteration, self.stage_index, self.member_index)

    @property
    def workdir(self) -> PurePosixPath:
        """Working directory relative to the run root."""
        return PurePosixPath(str(self.iteration), str(self.stage_index), str(self.member_index))

    def arg_dict(self) -> dict[str, str]:
        return parse_arg_tokens(self.args)


def parse_arg_tokens(tokens: Iterable[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise InvalidSpec(f"argument {tok!r} is not of the form key=value")
        out[key] = value
    return out


def format_arg_tokens(args: Mapping[str, object]) -> tuple[str, ...]:
    return tuple(f"{k}={v}" for k, v in args.items())


def validate_task(desc: TaskDescription) -> TaskDescription:
    """Return ``desc`` unchanged if its field invariants hold.

    Kernel names are checked later against a registry.
    """
    if desc.slots_required < 1:
        raise ZeroSlots(f"task {desc.task_id!r} requires {desc.slots_required} slots")
    if not desc.task_id:
        raise InvalidSpec("task_id must be non-empty")
    if not desc.kernel:
        raise InvalidSpec(f"task {desc.task_id!r} has no kernel")
    if min(desc.stage_index, desc.member_index, desc.iteration) < 0:
        raise InvalidSpec(f"task {desc.task_id!r} has a negative index")
    return desc


def validate_workload(tasks: Iterable[TaskDescription]) -> list[TaskDescription]:
    seen_ids: set[str] = set()
    seen_keys: set[tuple[int, int, int]] = set()
    out = []
    for desc in tasks:
        validate_task(desc)
        if desc.task_id in seen_ids:
            raise DuplicateTaskId(desc.task_id)
        if desc.key in seen_keys:
            raise DuplicateTaskId(f"{desc.task_id}: (iteration, stage, member) {desc.key} reused")
        seen_ids.add(desc.task_id)
        seen_keys.add(desc.key)
        out.append(desc)
    return out


@dataclass(frozen=True)
class TaskRecord:
    """Lifecycle history of one task. Updated only through :func:`transition`."""

    description: TaskDescription
    state: TaskState = TaskState.PENDING
    submit_time: Time | None = None
    start_time: Time | None = None
    end_time: Time | None = None
    assigned_slots: tuple[int, ...] = ()
    exit_status: int | None = None
    attempts: int = 0

    @property
    def task_id(self) -> str:
        return self.description.task_id


def transition(
    record: TaskRecord,
    new_state: TaskState,
    at: Time,
    *,
    slots: Iterable[int] = (),
    exit_status: int | None = None,
) -> TaskRecord:
    """Move ``record`` to ``new_state`` at time ``at`` and return the new record."""
    if new_state not in LEGAL_TRANSITIONS[record.state]:
        raise IllegalTransition(f"{record.task_id}: {record.state.value} -> {new_state.value}")

    if new_state is TaskState.SCHEDULED:
        # a retry starts a fresh attempt
        return dataclasses.replace(
            record, state=new_state, submit_time=at, start_time=None, end_time=None,
            assigned_slots=(), exit_status=None,
        )
    if new_state is TaskState.RUNNING:
        slots = tuple(slots)
        if len(slots) != record.description.slots_required:
            raise IllegalTransition(
                f"{record.task_id}: running on {len(slots)} slots, "
                f"needs {record.description.slots_required}"
            )
        if record.submit_time is not None and at < record.submit_time:
            raise IllegalTransition(f"{record.task_id}: start {at} before submit {record.submit_time}")
        return dataclasses.replace(
            record, state=new_state, start_time=at, assigned_slots=slots, attempts=record.attempts + 1
        )
    # Done / Failed
    if record.start_time is not None and at < record.start_time:
        raise IllegalTransition(f"{record.task_id}: end {at} before start {record.start_time}")
    if exit_status is None:
        exit_status = 0 if new_state is TaskState.DONE else 1
    return dataclasses.replace(record, state=new_state, end_time=at, exit_status=exit_status)


@dataclass(frozen=True)
class ResourceRequest:
    """What to ask the pilot for.

    ``queue_wait`` and ``dispatch_latency`` only affect the simulated backend:
    the first delays pilot activation, the second is the per-task cost of
    creating and submitting a task.
    """

    total_slots: int
    walltime_limit: float = 86400.0
    backend: BackendKind = BackendKind.SIMULATED
    queue_wait: float = 0.0
    dispatch_latency: float = 0.0

    def __post_init__(self):
        if self.total_slots < 1:
            raise InvalidSpec(f"total_slots must be >= 1, got {self.total_slots}")
        if self.walltime_limit <= 0:
            raise InvalidSpec(f"walltime_limit must be positive, got {self.walltime_limit}")
        if self.queue_wait < 0 or self.dispatch_latency < 0:
            raise InvalidSpec("queue_wait and dispatch_latency must be non-negative")


@dataclass
class RunConfig:
    seed: int = 0
    retry_limit: int = DEFAULT_RETRY_LIMIT
    output: str = "out"
