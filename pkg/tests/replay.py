"""Replay checks run against event logs produced by the engine."""

from __future__ import annotations

from ensemblekit.patterns import ComposedPattern
from ensemblekit.runtime.events import EventKind

from oracle import SAL, Composite, OraclePattern


class ReplayError(AssertionError):
    pass


def oracle_of(pattern) -> Composite:
    """Rebuild the dependency rules of an engine pattern for the oracle."""
    parts = pattern.parts if isinstance(pattern, ComposedPattern) else [pattern]
    out = []
    for part in parts:
        params = {
            k: (v.value if hasattr(v, "value") else v) for k, v in vars(part.spec.params).items()
        }
        out.append(OraclePattern(part.spec.variant.value, params, part.offset))
    return Composite(out)


def _key(ev):
    return (ev.data["iteration"], ev.data["stage"], ev.data["member"])


def check_capacity(log, total_slots: int) -> None:
    """No slot is used twice at once and no slot id lies outside the pool."""
    in_use: dict[int, str] = {}
    for ev in log:
        if ev.kind is EventKind.TASK_STARTED:
            for s in ev.slots:
                if not 0 <= s < total_slots:
                    raise ReplayError(f"{ev.task_id} got slot {s} outside the pool of {total_slots}")
                if s in in_use:
                    raise ReplayError(f"slot {s} given to {ev.task_id} while {in_use[s]} holds it")
                in_use[s] = ev.task_id
        elif ev.kind is EventKind.TASK_ENDED:
            for s in ev.slots:
                if in_use.pop(s, None) != ev.task_id:
                    raise ReplayError(f"{ev.task_id} released slot {s} it did not hold")
        if len(in_use) > total_slots:
            raise ReplayError("capacity exceeded")


def check_order(log) -> None:
    times = [ev.time for ev in log]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ReplayError("timestamps decrease")


def check_dependencies(log, rules: Composite) -> None:
    """Every task is scheduled only after all of its predecessors finished."""
    order_by_part = [[] for _ in rules.parts]
    done_by_part = [set() for _ in rules.parts]
    scheduled = set()

    def part_of(key):
        for i, part in enumerate(rules.parts):
            if part.owns(key):
                return i
        raise ReplayError(f"task {key} belongs to no pattern part")

    for ev in log:
        if ev.kind is EventKind.TASK_ENDED and ev.data.get("status") == "Done":
            i = part_of(_key(ev))
            order_by_part[i].append(_key(ev))
            done_by_part[i].add(_key(ev))
        elif ev.kind is EventKind.TASK_SCHEDULED and ev.task_id not in scheduled:
            scheduled.add(ev.task_id)
            key = _key(ev)
            i = part_of(key)
            for j in range(i):
                if len(done_by_part[j]) < rules.parts[j].planned():
                    raise ReplayError(f"{ev.task_id} scheduled before pattern part {j} finished")
            if not rules.parts[i].ready(key, order_by_part[i], done_by_part[i]):
                raise ReplayError(f"{ev.task_id} scheduled before its predecessors finished")


def check_sal_barrier(log, rules: Composite) -> None:
    """Within each iteration, analyses start only after every simulation ended."""
    for part in rules.parts:
        if part.variant != SAL:
            continue
        sim_end: dict[int, object] = {}
        ana_start: dict[int, object] = {}
        for ev in log:
            if ev.task_id is None or not part.owns(_key(ev)):
                continue
            it, stage, _ = _key(ev)
            if stage == 0 and ev.kind is EventKind.TASK_ENDED:
                sim_end[it] = max(sim_end.get(it, ev.time), ev.time)
            if stage == 1 and ev.kind is EventKind.TASK_STARTED:
                ana_start[it] = min(ana_start.get(it, ev.time), ev.time)
        for it, start in ana_start.items():
            if start < sim_end.get(it, start):
                raise ReplayError(f"iteration {it}: analysis started at {start} before the last simulation ended")


def check_conservation(log, planned: int) -> None:
    """A finished run ends every planned task exactly once with Done."""
    done = [ev.task_id for ev in log.of_kind(EventKind.TASK_ENDED) if ev.data.get("status") == "Done"]
    if len(done) != len(set(done)):
        raise ReplayError("a task completed twice")
    if len(done) != planned:
        raise ReplayError(f"{len(done)} tasks completed, {planned} planned")


def check_log(log, pattern, total_slots: int, finished: bool) -> None:
    check_order(log)
    check_capacity(log, total_slots)
    rules = oracle_of(pattern)
    check_dependencies(log, rules)
    check_sal_barrier(log, rules)
    if finished:
        check_conservation(log, pattern.planned)
        started = {ev.task_id for ev in log.of_kind(EventKind.TASK_STARTED)}
        ended = {ev.task_id for ev in log.of_kind(EventKind.TASK_ENDED)}
        if started != ended:
            raise ReplayError("a started task never ended")
