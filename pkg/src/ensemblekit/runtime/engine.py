"""The run loop: ready wave -> schedule -> execute -> record completion.

One logical thread owns all mutable state here. Completions arrive through
the backend's :meth:`~ensemblekit.runtime.backends.Backend.next_batch`.

Task creation is modeled as serial work on the engine: emitting a wave of
``k`` tasks occupies the engine for ``k * dispatch_latency`` (simulated) or
for as long as it really takes (local), and the wave is submitted to the
pilot queue when creation ends. Completions that arrive meanwhile are
handed to the pattern once the engine is free again.
"""

from __future__ import annotations

import logging
from pathlib import Path

from ..core import TaskDescription, TaskRecord, TaskState, transition
from ..errors import RunCancelled, TaskFailedPermanently, WalltimeExceeded
from ..kernels import ExecutablePlan, KernelRegistry, default_registry
from ..patterns import _template_fields
from .backends import Backend, CancelRequest, Completion, Timer
from .events import Event, EventKind, EventLog
from .pilot import Pilot, PilotState, check_fit
from .scheduler import Scheduler

log = logging.getLogger(__name__)


class Engine:
    def __init__(
        self,
        pattern,
        pilot: Pilot,
        backend: Backend,
        *,
        registry: KernelRegistry | None = None,
        retry_limit: int = 1,
        workdir: str | Path | None = None,
    ):
        self.pattern = pattern
        self.pilot = pilot
        self.backend = backend
        self.registry = registry or default_registry()
        self.retry_limit = retry_limit
        self.root = Path(workdir) / "run" if workdir is not None else None
        self.log = EventLog()
        self.records: dict[str, TaskRecord] = {}
        self.plans: dict[str, ExecutablePlan] = {}
        self.scheduler = Scheduler(pilot.total_slots)
        self._done_unrecorded: list[TaskRecord] = []
        self._creating = False
        self._running: set[str] = set()

    # -- event helpers

    def _emit(self, kind: EventKind, task: TaskDescription | None = None, slots=(), at=None, **data):
        t = self.backend.now() if at is None else at
        if self.log.events and t < self.log.events[-1].time:
            t = self.log.events[-1].time  # local clocks read on other threads
        if task is not None:
            data.update(
                role=task.role, iteration=task.iteration, stage=task.stage_index,
                member=task.member_index, kernel=task.kernel,
            )
        self.log.append(Event(t, kind, task.task_id if task else None, tuple(slots), data))
        return t

    def _set(self, task_id: str, state: TaskState, at, **kw) -> TaskRecord:
        rec = transition(self.records[task_id], state, at, **kw)
        self.records[task_id] = rec
        return rec

    # -- binding

    def _check_bindings(self) -> None:
        check_fit(self.pilot, self.pattern)
        for spec in self.pattern.specs():
            ctx = {name: 1 for name in _template_fields(spec)}
            ctx["members"] = "0"
            for sk in spec.stage_kernels.values():
                args = [tok.format_map(ctx) for tok in sk.args]
                self.registry.resolve(sk.kernel, args, self.backend.kind)

    # -- main loop

    def run(self) -> EventLog:
        b = self.backend
        b.start()
        specs = self.pattern.specs()
        self._emit(
            EventKind.ENGINE_STARTED, at=b.number(0),
            variant=",".join(s.variant.value for s in specs), planned=self.pattern.planned,
            backend=b.kind.value,
        )
        self._check_bindings()
        self.pilot.submit_time = self._emit(EventKind.PILOT_SUBMITTED, total_slots=self.pilot.total_slots)
        b.advance(b.number(self.pilot.request.queue_wait))
        self.pilot.state = PilotState.ACTIVE
        self.pilot.on_cancel = b.request_cancel
        self.pilot.activation_time = self._emit(EventKind.PILOT_ACTIVE, total_slots=self.pilot.total_slots)
        deadline = self.pilot.activation_time + b.number(self.pilot.request.walltime_limit)

        try:
            self._start_wave()
            self._dispatch()
            while not (self.pattern.finished and not self._running and not self._creating):
                batch = b.next_batch(deadline)
                if batch is None:
                    self._abort(WalltimeExceeded, f"walltime {self.pilot.request.walltime_limit}s exceeded", at=deadline)
                _, items = batch
                for item in items:
                    if isinstance(item, CancelRequest):
                        self._abort(RunCancelled, "pilot cancelled while tasks were running")
                    elif isinstance(item, Completion):
                        self._on_task_end(item)
                    elif isinstance(item, Timer):
                        self._submit(item.payload)
                        self._creating = False
                if not self._creating:
                    self._start_wave()
                self._dispatch()
            self._emit(EventKind.PATTERN_FINISHED, completed=len(self.pattern.completed))
            self.pilot.on_cancel = None
            self.pilot.state = PilotState.CANCELLED
            b.close()
            self._emit(EventKind.PILOT_CANCELLED, total_slots=self.pilot.total_slots)
            self._emit(EventKind.ENGINE_STOPPED)
        finally:
            self.pilot.on_cancel = None
            b.close()
        return self.log

    def _start_wave(self) -> None:
        for rec in self._done_unrecorded:
            self.pattern.record_completion(rec)
        self._done_unrecorded.clear()
        if self.pattern.finished:
            return
        start = self.backend.now()
        wave = self.pattern.ready_wave()
        if not wave:
            return
        for desc in wave:
            self.records[desc.task_id] = TaskRecord(desc)
            self.plans[desc.task_id] = self.registry.resolve(desc.kernel, desc.args, self.backend.kind)
        cost = self.backend.creation_cost(len(wave), self.pilot.request.dispatch_latency)
        if cost:
            self._emit(EventKind.PATTERN_EMITTED, at=start, n_tasks=len(wave), duration=cost)
            self._creating = True
            self.backend.add_timer(start + cost, wave)
        else:
            end = self.backend.now()
            self._emit(EventKind.PATTERN_EMITTED, at=start, n_tasks=len(wave), duration=end - start)
            self._submit(wave)

    def _submit(self, wave: list[TaskDescription]) -> None:
        for desc in wave:
            at = self._emit(EventKind.TASK_SCHEDULED, desc, slots_required=desc.slots_required, attempt=1)
            self._set(desc.task_id, TaskState.SCHEDULED, at)
            self.scheduler.submit(desc)

    def _dispatch(self) -> None:
        for desc, slots in self.scheduler.schedule_step(self.backend.now()):
            at = self._emit(EventKind.TASK_STARTED, desc, slots)
            rec = self._set(desc.task_id, TaskState.RUNNING, at, slots=slots)
            self._running.add(desc.task_id)
            workdir = self.root / desc.workdir if self.root is not None else None
            self.backend.launch(rec, self.plans[desc.task_id], workdir)

    def _on_task_end(self, c: Completion) -> None:
        rec = self.records[c.task_id]
        if rec.state is not TaskState.RUNNING:
            return
        self._running.discard(c.task_id)
        self.scheduler.release(rec.assigned_slots)
        desc = rec.description
        state = TaskState.DONE if c.exit_status == 0 else TaskState.FAILED
        at = self._emit(EventKind.TASK_ENDED, desc, rec.assigned_slots, at=c.time,
                        status=state.value, exit_status=c.exit_status)
        rec = self._set(c.task_id, state, at, exit_status=c.exit_status)
        if state is TaskState.DONE:
            self._done_unrecorded.append(rec)
            return
        if rec.attempts > self.retry_limit:
            self._abort(TaskFailedPermanently, f"task {c.task_id} failed {rec.attempts} time(s)")
        log.info("retrying %s (attempt %d)", c.task_id, rec.attempts + 1)
        at = self._emit(EventKind.TASK_SCHEDULED, desc, slots_required=desc.slots_required,
                        attempt=rec.attempts + 1)
        self._set(c.task_id, TaskState.SCHEDULED, at)
        self.scheduler.submit(desc)

    def _abort(self, exc_type, message: str, at=None):
        at = self.backend.now() if at is None else at
        for task_id in self.backend.terminate_all():
            rec = self.records[task_id]
            if rec.state is TaskState.RUNNING:
                self._running.discard(task_id)
                t = self._emit(EventKind.TASK_ENDED, rec.description, rec.assigned_slots, at=at,
                               status=TaskState.FAILED.value, exit_status=None, reason="aborted")
                self._set(task_id, TaskState.FAILED, t, exit_status=-1)
        self.pilot.state = PilotState.DONE if exc_type is WalltimeExceeded else PilotState.CANCELLED
        self._emit(EventKind.PILOT_CANCELLED, at=at, total_slots=self.pilot.total_slots, reason=exc_type.__name__)
        self._emit(EventKind.ENGINE_STOPPED, at=at)
        raise exc_type(message, self.log)


def run(pattern, pilot: Pilot, backend: Backend, **options) -> EventLog:
    """Execute ``pattern`` on ``pilot`` and return the complete event log.

    Raises :class:`~ensemblekit.errors.RunAborted` subclasses carrying the
    partial log when a task fails permanently, the walltime runs out or the
    pilot is cancelled.
    """
    return Engine(pattern, pilot, backend, **options).run()
