"""Independent brute-force reference for pattern readiness and run timing.

Nothing here calls into the engine, scheduler or pattern state machines.
Readiness is recomputed from scratch on every step by testing a per-variant
predicate over every task the pattern could ever contain, and the clock
jumps by scanning all running tasks for the earliest end. It is slow and
simple on purpose; tests compare the engine against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

Key = tuple[int, int, int]  # (iteration, stage, member)

EOP = "ensemble-of-pipelines"
EE = "ensemble-exchange"
SAL = "simulation-analysis-loop"


def tid(key: Key) -> str:
    it, stage, member = key
    return "i%04d-s%02d-m%05d" % (it, stage, member)


@dataclass(frozen=True)
class OraclePattern:
    """Dependency rules of one unit pattern, written as plain predicates.

    ``params`` uses the same names as the package's parameter classes;
    ``offset`` shifts iteration numbers as sequential composition does.
    """

    variant: str
    params: dict
    offset: int = 0

    @property
    def n_iter(self) -> int:
        return 1 if self.variant == EOP else self.params.get("n_iterations", 1)

    @property
    def width(self) -> int:
        p = self.params
        return {EOP: p.get("n_pipelines"), EE: p.get("n_members"), SAL: p.get("n_simulations")}[self.variant]

    def planned(self) -> int:
        p = self.params
        if self.variant == EOP:
            return p["n_pipelines"] * p["n_stages"]
        if self.variant == SAL:
            return (p["n_simulations"] + p["n_analyses"]) * self.n_iter
        n = p["n_members"]
        per_iter = {"ensemble": 1, "member": n}.get(p["pairing_policy"], n // 2)
        return (n + per_iter) * self.n_iter

    def universe(self) -> list[Key]:
        """Every key the pattern could emit (a superset for dynamic pairing)."""
        p = self.params
        its = range(self.offset, self.offset + self.n_iter)
        if self.variant == EOP:
            return [(self.offset, s, m) for s in range(p["n_stages"]) for m in range(p["n_pipelines"])]
        if self.variant == SAL:
            return [(i, 0, m) for i in its for m in range(p["n_simulations"])] + [
                (i, 1, a) for i in its for a in range(p["n_analyses"])
            ]
        n = p["n_members"]
        return [(i, s, m) for i in its for s in (0, 1) for m in range(n)]

    def _pairs(self, order: list[Key], it: int) -> list[tuple[int, int]]:
        seq = [m for (i, s, m) in order if i == it and s == 0]
        return [(seq[k], seq[k + 1]) for k in range(0, len(seq) - 1, 2)]

    def ready(self, key: Key, order: list[Key], done: set[Key] | None = None) -> bool:
        """Are all predecessors of ``key`` among the completed tasks ``order``?

        ``done`` may pass ``set(order)`` when the caller already has it.
        """
        done = set(order) if done is None else done
        it, stage, m = key
        first = it == self.offset
        p = self.params
        if self.variant == EOP:
            return stage == 0 or (it, stage - 1, m) in done
        if self.variant == SAL:
            if stage == 0:
                return first or all((it - 1, 1, a) in done for a in range(p["n_analyses"]))
            return all((it, 0, s) in done for s in range(p["n_simulations"]))

        n = p["n_members"]
        policy = p["pairing_policy"]
        if policy == "ensemble":
            if stage == 1:
                return m == 0 and all((it, 0, s) in done for s in range(n))
            return first or (it - 1, 1, 0) in done
        if policy == "member":
            if stage == 1:
                return (it, 0, m) in done
            return first or (it - 1, 1, m) in done
        if policy == "neighbor":
            if stage == 1:
                return m % 2 == 0 and m + 1 < n and (it, 0, m) in done and (it, 0, m + 1) in done
            if first:
                return True
            if (m ^ 1) >= n:
                return (it - 1, 0, m) in done
            return (it - 1, 1, m - m % 2) in done
        # readiness: consecutive completions pair up; an odd last member skips
        if stage == 1:
            return any(min(a, b) == m for a, b in self._pairs(order, it))
        if first:
            return True
        prev = it - 1
        for a, b in self._pairs(order, prev):
            if m in (a, b):
                return (prev, 1, min(a, b)) in done
        seq = [mm for (i, s, mm) in order if i == prev and s == 0]
        return len(seq) == n and n % 2 == 1 and seq[-1] == m

    def ready_set(self, order: list[Key]) -> set[Key]:
        done = set(order)
        return {k for k in self.universe() if self.ready(k, order, done)}

    def owns(self, key: Key) -> bool:
        return self.offset <= key[0] < self.offset + self.n_iter


@dataclass
class Composite:
    """Sequential composition: a part's tasks wait until the previous part is done."""

    parts: list[OraclePattern]

    def planned(self) -> int:
        return sum(p.planned() for p in self.parts)

    def ready_set(self, order: list[Key]) -> set[Key]:
        out: set[Key] = set()
        for part in self.parts:
            mine = [k for k in order if part.owns(k)]
            out |= part.ready_set(mine)
            if len(mine) < part.planned():
                break
        return out


@dataclass
class Trace:
    events: list[tuple[Fraction, str, str | None, tuple[int, ...]]] = field(default_factory=list)

    def add(self, t, kind, task=None, slots=()):
        self.events.append((Fraction(t), kind, task, tuple(slots)))

    @property
    def makespan(self) -> Fraction:
        return self.events[-1][0]


def simulate(
    pattern,
    slots_for_stage,
    duration,
    total_slots: int,
    *,
    queue_wait=Fraction(0),
    latency=Fraction(0),
    fail_first=frozenset(),
) -> Trace:
    """Run ``pattern`` on a first-fit slot pool and return its event trace.

    ``slots_for_stage(key)`` and ``duration(key)`` give each task's demand;
    tasks in ``fail_first`` fail their first attempt and are queued again.
    Creating a wave of k tasks keeps the engine busy for ``k * latency``;
    completions seen meanwhile only count once creation is over.
    """
    tr = Trace()
    tr.add(0, "EngineStarted")
    tr.add(0, "PilotSubmitted")
    t = Fraction(queue_wait)
    tr.add(t, "PilotActive")

    free = set(range(total_slots))
    queue: list[Key] = []
    running: dict[Key, tuple[Fraction, tuple[int, ...], int]] = {}
    attempts: dict[Key, int] = {}
    emitted: set[Key] = set()
    order: list[Key] = []  # completions the pattern has been told about
    unseen: list[Key] = []  # completions not yet told
    creating_until = None
    pending: list[Key] = []

    def submit(keys):
        for k in keys:
            tr.add(t, "TaskScheduled", tid(k))
            queue.append(k)

    def emit():
        nonlocal creating_until, pending
        order.extend(unseen)
        unseen.clear()
        if len(order) == pattern.planned():
            return
        wave = sorted(pattern.ready_set(order) - emitted)
        if not wave:
            return
        emitted.update(wave)
        cost = len(wave) * Fraction(latency)
        tr.add(t, "PatternEmitted")
        if cost > 0:
            creating_until, pending = t + cost, wave
        else:
            submit(wave)

    def dispatch():
        for k in list(queue):
            need = slots_for_stage(k)
            if need <= len(free):
                got = tuple(sorted(free)[:need])
                free.difference_update(got)
                queue.remove(k)
                attempts[k] = attempts.get(k, 0) + 1
                tr.add(t, "TaskStarted", tid(k), got)
                running[k] = (t + duration(k), got, attempts[k])

    emit()
    dispatch()
    while not (len(order) == pattern.planned() and not running and creating_until is None):
        times = [end for end, _, _ in running.values()]
        if creating_until is not None:
            times.append(creating_until)
        t = min(times)
        for k in sorted((k for k, v in running.items() if v[0] == t), key=tid):
            _, got, attempt = running.pop(k)
            free.update(got)
            tr.add(t, "TaskEnded", tid(k), got)
            if k in fail_first and attempt == 1:
                submit([k])
            else:
                unseen.append(k)
        if creating_until == t:
            creating_until = None
            submit(pending)
            pending = []
        if creating_until is None:
            emit()
        dispatch()
    tr.add(t, "PatternFinished")
    tr.add(t, "PilotCancelled")
    tr.add(t, "EngineStopped")
    return tr
