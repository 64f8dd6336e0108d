"""Time-to-completion decomposition and scaling series built from event logs.

The run timeline ``[0, ttc]`` is split into four disjoint parts:

* core overhead: engine start until the pilot is active, plus teardown after
  the pattern finished;
* execution time: instants where at least one task is running;
* pattern overhead: task-creation spans that no running task hides;
* runtime overhead: everything else (dispatch gaps, process start-up, ...).

The parts sum to ``ttc`` by construction. With the simulated backend all
times are exact rationals, so the sum is exact as well.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .core import Time
from .errors import IncompleteLog, MixedModes
from .runtime.events import EventKind, EventLog

OVERHEAD_COLUMNS = ("ttc", "core_overhead", "pattern_overhead", "runtime_overhead", "execution_time")


@dataclass(frozen=True)
class Bookends:
    started: Time
    active: Time
    finished: Time
    stopped: Time


@dataclass(frozen=True)
class StageSpan:
    start: Time
    end: Time
    duration: Time


@dataclass(frozen=True)
class TaskRow:
    task_id: str
    role: str
    iteration: int
    stage: int
    member: int
    kernel: str
    slots: int
    submit: Time
    start: Time
    end: Time
    attempts: int
    status: str


@dataclass
class RunReport:
    ttc: Time
    core_overhead: Time
    pattern_overhead: Time
    runtime_overhead: Time
    execution_time: Time
    per_stage: dict[str, StageSpan]
    tasks: list[TaskRow]
    total_slots: int
    variant: str
    kernels: tuple[str, ...]
    ensemble_size: int
    slots_by_role: dict[str, int] = field(default_factory=dict)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def stage_time(self, role: str) -> Time:
        span = self.per_stage.get(role)
        return span.duration if span is not None else 0

    def components(self) -> dict[str, Time]:
        out = {name: getattr(self, name) for name in OVERHEAD_COLUMNS}
        for role, span in self.per_stage.items():
            out[f"{role}_time"] = span.duration
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "kernels": list(self.kernels),
            "total_slots": self.total_slots,
            "n_tasks": self.n_tasks,
            "ensemble_size": self.ensemble_size,
            **{k: float(v) for k, v in self.components().items()},
            "per_stage": {
                role: {"start": float(s.start), "end": float(s.end), "duration": float(s.duration)}
                for role, s in self.per_stage.items()
            },
        }

    def to_table(self) -> str:
        rows = [(k, f"{float(v):.6f}") for k, v in self.components().items()]
        width = max(len(k) for k, _ in rows)
        head = f"{self.variant} on {self.total_slots} slots, {self.n_tasks} tasks"
        return "\n".join([head] + [f"  {k:<{width}}  {v:>14}" for k, v in rows])


def _union(intervals: Iterable[tuple[Time, Time]]) -> list[tuple[Time, Time]]:
    merged: list[list[Time]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


def _measure(intervals: Iterable[tuple[Time, Time]]) -> Time:
    return sum((e - s for s, e in _union(intervals)), Fraction(0))


def _overlap(span: tuple[Time, Time], union: list[tuple[Time, Time]]) -> Time:
    s0, e0 = span
    total = Fraction(0)
    for s, e in union:
        if e <= s0:
            continue
        if s >= e0:
            break
        total += min(e, e0) - max(s, s0)
    return total


def bookends_of(log: EventLog) -> Bookends:
    def at(kind):
        ev = log.first(kind)
        if ev is None:
            raise IncompleteLog(f"no {kind.value} event; the run did not finish")
        return ev.time

    return Bookends(
        at(EventKind.ENGINE_STARTED),
        at(EventKind.PILOT_ACTIVE),
        at(EventKind.PATTERN_FINISHED),
        at(EventKind.ENGINE_STOPPED),
    )


def decompose(log: EventLog, bookends: Bookends | None = None) -> RunReport:
    """Split a finished run's time to completion into its components."""
    b = bookends or bookends_of(log)
    started = log.first(EventKind.ENGINE_STARTED)
    active = log.first(EventKind.PILOT_ACTIVE)

    open_runs: dict[str, tuple[Time, tuple[int, ...]]] = {}
    intervals: list[tuple[Time, Time]] = []
    by_role: dict[str, list[tuple[Time, Time]]] = defaultdict(list)
    rows: dict[str, dict] = {}
    creation: list[tuple[Time, Time]] = []
    for ev in log:
        if ev.kind is EventKind.PATTERN_EMITTED:
            creation.append((ev.time, ev.time + ev.data["duration"]))
        elif ev.kind is EventKind.TASK_SCHEDULED:
            row = rows.setdefault(ev.task_id, {"submit": ev.time, "attempts": 0, **ev.data})
            row["slots"] = ev.data.get("slots_required", 1)
        elif ev.kind is EventKind.TASK_STARTED:
            open_runs[ev.task_id] = (ev.time, ev.slots)
            rows[ev.task_id]["attempts"] += 1
        elif ev.kind is EventKind.TASK_ENDED:
            if ev.task_id not in open_runs:
                raise IncompleteLog(f"{ev.task_id} ended without starting")
            start, _ = open_runs.pop(ev.task_id)
            intervals.append((start, ev.time))
            row = rows[ev.task_id]
            by_role[row["role"]].append((start, ev.time))
            row.update(start=start, end=ev.time, status=ev.data.get("status", "Done"))
    if open_runs:
        raise IncompleteLog(f"tasks still running: {', '.join(sorted(open_runs))}")

    ttc = b.stopped - b.started
    core = (b.active - b.started) + (b.stopped - b.finished)
    busy = _union(intervals)
    execution = _measure(busy)
    pattern = sum((e - s - _overlap((s, e), busy) for s, e in creation), Fraction(0))
    runtime = ttc - core - pattern - execution

    per_stage = {}
    for role, spans in by_role.items():
        per_stage[role] = StageSpan(
            min(s for s, _ in spans), max(e for _, e in spans), _measure(spans)
        )
    tasks = [
        TaskRow(
            task_id=tid, role=r["role"], iteration=r["iteration"], stage=r["stage"],
            member=r["member"], kernel=r["kernel"], slots=r["slots"], submit=r["submit"],
            start=r.get("start"), end=r.get("end"), attempts=r["attempts"],
            status=r.get("status", "Scheduled"),
        )
        for tid, r in sorted(rows.items())
    ]
    first_iter = min((t.iteration for t in tasks), default=0)
    slots_by_role: dict[str, int] = {}
    for t in tasks:
        slots_by_role[t.role] = max(slots_by_role.get(t.role, 0), t.slots)
    return RunReport(
        ttc=ttc,
        core_overhead=core,
        pattern_overhead=pattern,
        runtime_overhead=runtime,
        execution_time=execution,
        per_stage=per_stage,
        tasks=tasks,
        total_slots=active.data.get("total_slots", 0),
        variant=started.data.get("variant", ""),
        kernels=tuple(sorted({t.kernel for t in tasks})),
        ensemble_size=sum(1 for t in tasks if t.stage == 0 and t.iteration == first_iter),
        slots_by_role=slots_by_role,
    )


class ScalingMode(str, enum.Enum):
    STRONG = "strong"
    WEAK = "weak"
    MPI = "mpi"
    VALIDATION = "pattern-validation"


@dataclass(frozen=True)
class ScalingPoint:
    slots: int
    n_tasks: int
    slots_per_task: int
    components: dict[str, Time]


@dataclass
class ScalingSeries:
    mode: ScalingMode
    variant: str
    kernels: tuple[str, ...]
    points: list[ScalingPoint]

    def column(self, name: str) -> list[Time]:
        return [p.components.get(name, 0) for p in self.points]

    def columns(self) -> list[str]:
        names: list[str] = []
        for p in self.points:
            names += [k for k in p.components if k not in names]
        return names

    def to_records(self) -> list[dict]:
        cols = self.columns()
        return [
            {
                "mode": self.mode.value,
                "variant": self.variant,
                "slots": p.slots,
                "n_tasks": p.n_tasks,
                "slots_per_task": p.slots_per_task,
                **{c: float(p.components.get(c, 0)) for c in cols},
            }
            for p in self.points
        ]

    def to_table(self) -> str:
        cols = ["slots", "n_tasks", "slots_per_task"] + self.columns()
        lines = [f"{self.mode.value} scaling, {self.variant} [{', '.join(self.kernels)}]"]
        lines.append("  ".join(f"{c:>16}" for c in cols))
        for rec in self.to_records():
            lines.append("  ".join(
                f"{rec[c]:>16.6f}" if isinstance(rec[c], float) else f"{rec[c]:>16}" for c in cols
            ))
        return "\n".join(lines)


def _primary_role(report: RunReport) -> str:
    stage0 = [t.role for t in report.tasks if t.stage == 0]
    return stage0[0] if stage0 else ""


def _check_same_workload(runs: Sequence[RunReport]) -> None:
    if not runs:
        raise MixedModes("no runs given")
    variants = {r.variant for r in runs}
    kernels = {r.kernels for r in runs}
    if len(variants) > 1:
        raise MixedModes(f"runs mix pattern variants {sorted(variants)}")
    if len(kernels) > 1:
        raise MixedModes(f"runs mix kernel sets {sorted(kernels)}")


def scaling_report(runs: Sequence[RunReport], mode: ScalingMode | str) -> ScalingSeries:
    """Collect runs into a strong- or weak-scaling series, checking the mode invariant."""
    mode = ScalingMode(mode)
    if mode is ScalingMode.MPI:
        return mpi_report(runs)
    _check_same_workload(runs)
    if mode is ScalingMode.STRONG and len({r.ensemble_size for r in runs}) > 1:
        raise MixedModes("strong scaling needs the same number of tasks at every point")
    if mode in (ScalingMode.WEAK, ScalingMode.VALIDATION) and len({Fraction(r.ensemble_size, r.total_slots) for r in runs}) > 1:
        raise MixedModes("weak scaling needs the same tasks-per-slot ratio at every point")
    points = [
        ScalingPoint(r.total_slots, r.ensemble_size, r.slots_by_role.get(_primary_role(r), 1), r.components())
        for r in runs
    ]
    if mode is not ScalingMode.VALIDATION:
        points.sort(key=lambda p: p.slots)
    return ScalingSeries(mode, runs[0].variant, runs[0].kernels, points)


def mpi_report(runs: Sequence[RunReport]) -> ScalingSeries:
    """Simulation time against cores per task, at a fixed number of concurrent tasks."""
    _check_same_workload(runs)
    if len({r.ensemble_size for r in runs}) > 1:
        raise MixedModes("multi-slot series needs the same number of tasks at every point")
    points = []
    for r in runs:
        role = _primary_role(r)
        points.append(ScalingPoint(
            r.total_slots, r.ensemble_size, r.slots_by_role.get(role, 1),
            {f"{role}_time": r.stage_time(role), **{k: getattr(r, k) for k in OVERHEAD_COLUMNS}},
        ))
    points.sort(key=lambda p: p.slots_per_task)
    return ScalingSeries(ScalingMode.MPI, runs[0].variant, runs[0].kernels, points)
