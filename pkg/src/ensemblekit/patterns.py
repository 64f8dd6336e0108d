"""Execution patterns as state machines.

A pattern is told which tasks have completed and hands back the next wave of
tasks whose predecessors are all done. Three unit patterns are provided:

* ensemble of pipelines: N independent pipelines of M ordered stages;
* ensemble exchange: members alternate a simulation and an exchange, with
  no global barrier unless the whole-ensemble exchange policy is chosen;
* simulation-analysis loop: N simulations, a barrier, M analyses, a barrier,
  repeated for a number of iterations.

Patterns compose sequentially with :func:`compose`.
"""

from __future__ import annotations

import enum
import string
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

from .core import TaskDescription, TaskRecord, TaskState, parse_arg_tokens, task_id_for
from .errors import InvalidSpec, TaskNotDone, UnknownKernel, UnknownTask

Key = tuple[int, int, int]  # (iteration, stage, member)


class Variant(str, enum.Enum):
    ENSEMBLE_OF_PIPELINES = "ensemble-of-pipelines"
    ENSEMBLE_EXCHANGE = "ensemble-exchange"
    SIMULATION_ANALYSIS_LOOP = "simulation-analysis-loop"


class PairingPolicy(str, enum.Enum):
    NEIGHBOR_BY_INDEX = "neighbor"
    READINESS_PAIRS = "readiness"
    # one exchange task over every member of the iteration
    WHOLE_ENSEMBLE = "ensemble"
    # each member exchanges alone; degenerate case without interaction
    PER_MEMBER = "member"



@dataclass(frozen=True)
class StageKernel:
    """Kernel bound to one stage role. ``args`` are ``key=value`` templates."""

    kernel: str
    args: tuple[str, ...] = ()
    slots: int = 1


@dataclass(frozen=True)
class EoPParams:
    n_pipelines: int
    n_stages: int


@dataclass(frozen=True)
class EEParams:
    n_members: int
    n_iterations: int = 1
    pairing_policy: PairingPolicy = PairingPolicy.WHOLE_ENSEMBLE


@dataclass(frozen=True)
class SALParams:
    n_simulations: int
    n_analyses: int = 1
    n_iterations: int = 1


Params = Union[EoPParams, EEParams, SALParams]

_PARAMS_FOR = {
    Variant.ENSEMBLE_OF_PIPELINES: EoPParams,
    Variant.ENSEMBLE_EXCHANGE: EEParams,
    Variant.SIMULATION_ANALYSIS_LOOP: SALParams,
}

ROLES = {
    Variant.ENSEMBLE_EXCHANGE: ("simulation", "exchange"),
    Variant.SIMULATION_ANALYSIS_LOOP: ("simulation", "analysis"),
}


@dataclass(frozen=True)
class PatternSpec:
    """A pattern variant, its parameters and the kernel bound to each stage role.

    For ensemble-of-pipelines the roles are taken in order as stages 0..M-1;
    a single role is reused for every stage.
    """

    variant: Variant
    params: Params
    stage_kernels: Mapping[str, StageKernel] = field(default_factory=dict)
    # substituted for {seed} in argument templates
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            raise InvalidSpec(f"unknown pattern variant {self.variant!r}") from None

    @property
    def n_iterations(self) -> int:
        return 1 if isinstance(self.params, EoPParams) else self.params.n_iterations

    def role_for_stage(self, stage: int) -> str:
        roles = list(self.stage_kernels)
        if self.variant is Variant.ENSEMBLE_OF_PIPELINES:
            return roles[0] if len(roles) == 1 else roles[stage]
        return ROLES[self.variant][stage]

    def planned_count(self) -> int:
        p = self.params
        if isinstance(p, EoPParams):
            return p.n_pipelines * p.n_stages
        if isinstance(p, SALParams):
            return (p.n_simulations + p.n_analyses) * p.n_iterations
        per_iter = {
            PairingPolicy.PER_MEMBER: p.n_members,
            PairingPolicy.WHOLE_ENSEMBLE: 1,
        }.get(p.pairing_policy, p.n_members // 2)
        return (p.n_members + per_iter) * p.n_iterations

    def max_slots(self) -> int:
        return max(k.slots for k in self.stage_kernels.values())

    def validate(self, registry=None) -> PatternSpec:
        variant = Variant(self.variant)
        p = self.params
        if not isinstance(p, _PARAMS_FOR[variant]):
            raise InvalidSpec(f"{variant.value} needs {_PARAMS_FOR[variant].__name__}")
        counts = {k: v for k, v in vars(p).items() if isinstance(v, int) and not isinstance(v, enum.Enum)}
        for name, value in counts.items():
            if value < 1:
                raise InvalidSpec(f"{name} must be positive, got {value}")
        if isinstance(p, EEParams):
            if p.n_members < 2:
                raise InvalidSpec(f"ensemble exchange needs at least 2 members, got {p.n_members}")
            PairingPolicy(p.pairing_policy)
        roles = list(self.stage_kernels)
        if variant is Variant.ENSEMBLE_OF_PIPELINES:
            if len(roles) not in (1, p.n_stages):
                raise InvalidSpec(f"{p.n_stages} stages but {len(roles)} stage kernels")
        elif sorted(roles) != sorted(ROLES[variant]):
            raise InvalidSpec(f"{variant.value} needs stage roles {ROLES[variant]}, got {tuple(roles)}")
        context = _template_fields(self)
        for role, sk in self.stage_kernels.items():
            if sk.slots < 1:
                raise InvalidSpec(f"stage {role!r}: slots must be >= 1")
            if registry is not None and sk.kernel not in registry:
                raise UnknownKernel(sk.kernel)
            for tok in sk.args:
                for _, name, _, _ in string.Formatter().parse(tok):
                    if name is not None and name not in context:
                        raise InvalidSpec(f"stage {role!r}: unknown placeholder {{{name}}} in {tok!r}")
            parse_arg_tokens(sk.args)
        return self


def _template_fields(spec: PatternSpec) -> set[str]:
    common = {"member", "iteration", "stage", "slots", "group_size", "members", "seed"}
    return common | {k for k in vars(spec.params) if k != "pairing_policy"}


def pair_for_exchange(ready_members: Iterable[int], policy: PairingPolicy) -> list[tuple[int, int]]:
    """Disjoint exchange pairs among ``ready_members``.

    Neighbor pairing matches ``(2i, 2i+1)`` when both are ready. Readiness
    pairing takes members two at a time in the order given, which callers
    pass as completion order. Members left over wait.
    """
    policy = PairingPolicy(policy)
    if policy is PairingPolicy.NEIGHBOR_BY_INDEX:
        ready = set(ready_members)
        return [(m, m + 1) for m in sorted(ready) if m % 2 == 0 and m + 1 in ready]
    if policy is PairingPolicy.READINESS_PAIRS:
        seq = list(ready_members)
        return [(seq[i], seq[i + 1]) for i in range(0, len(seq) - 1, 2)]
    raise InvalidSpec(f"{policy.value} is not a pairwise policy")


class PatternState:
    """Single-writer state machine shared by the unit patterns."""

    def __init__(self, spec: PatternSpec, iteration_offset: int = 0):
        self.spec = spec
        self.offset = iteration_offset
        self.planned = spec.planned_count()
        self.completed: set[Key] = set()
        self.emitted: set[str] = set()
        self._tasks: dict[str, TaskDescription] = {}
        self._pending: set[Key] = set(self._initial())
        self._groups: dict[Key, tuple[int, ...]] = {}

    @property
    def finished(self) -> bool:
        return len(self.completed) == self.planned

    @property
    def iterations(self) -> range:
        return range(self.offset, self.offset + self.spec.n_iterations)

    def max_slots(self) -> int:
        return self.spec.max_slots()

    def specs(self) -> list[PatternSpec]:
        return [self.spec]

    def ready_wave(self) -> list[TaskDescription]:
        """Tasks whose predecessors are complete and which were not emitted yet."""
        wave = [self._describe(key) for key in sorted(self._pending)]
        self._pending.clear()
        for desc in wave:
            self.emitted.add(desc.task_id)
            self._tasks[desc.task_id] = desc
        return wave

    def record_completion(self, record: TaskRecord) -> PatternState:
        desc = self._tasks.get(record.task_id)
        if desc is None:
            raise UnknownTask(record.task_id)
        if record.state is not TaskState.DONE:
            raise TaskNotDone(f"{record.task_id} is {record.state.value}")
        if desc.key in self.completed:
            return self
        self.completed.add(desc.key)
        self._pending.update(self._on_complete(desc))
        return self

    def owns(self, task_id: str) -> bool:
        return task_id in self._tasks

    def task(self, task_id: str) -> TaskDescription:
        return self._tasks[task_id]

    # -- per-variant hooks

    def _initial(self) -> Iterable[Key]:
        raise NotImplementedError

    def _on_complete(self, desc: TaskDescription) -> Iterable[Key]:
        raise NotImplementedError

    def _context(self, key: Key) -> dict[str, object]:
        it, stage, member = key
        ctx = {k: v for k, v in vars(self.spec.params).items() if k != "pairing_policy"}
        ctx.update(
            member=member, iteration=it, stage=stage, group_size=1, members=str(member), seed=self.spec.seed
        )
        return ctx

    def _describe(self, key: Key) -> TaskDescription:
        it, stage, member = key
        role = self.spec.role_for_stage(stage)
        sk = self.spec.stage_kernels[role]
        ctx = self._context(key)
        ctx["slots"] = sk.slots
        return TaskDescription(
            task_id=task_id_for(*key),
            kernel=sk.kernel,
            args=tuple(tok.format_map(ctx) for tok in sk.args),
            slots_required=sk.slots,
            stage_index=stage,
            member_index=member,
            iteration=it,
            role=role,
        )


class EnsembleOfPipelines(PatternState):
    def _initial(self):
        p = self.spec.params
        return [(self.offset, 0, m) for m in range(p.n_pipelines)]

    def _on_complete(self, desc):
        if desc.stage_index + 1 < self.spec.params.n_stages:
            return [(desc.iteration, desc.stage_index + 1, desc.member_index)]
        return []


class SimulationAnalysisLoop(PatternState):
    def __init__(self, spec, iteration_offset=0):
        self._done: dict[tuple[int, int], int] = defaultdict(int)
        super().__init__(spec, iteration_offset)

    def _initial(self):
        return [(self.offset, 0, m) for m in range(self.spec.params.n_simulations)]

    def _on_complete(self, desc):
        p = self.spec.params
        it, stage = desc.iteration, desc.stage_index
        self._done[it, stage] += 1
        if stage == 0 and self._done[it, 0] == p.n_simulations:
            return [(it, 1, a) for a in range(p.n_analyses)]
        if stage == 1 and self._done[it, 1] == p.n_analyses and it + 1 in self.iterations:
            return [(it + 1, 0, m) for m in range(p.n_simulations)]
        return []

    def _context(self, key):
        ctx = super()._context(key)
        if key[1] == 1:
            ctx["group_size"] = self.spec.params.n_simulations
            ctx["members"] = ",".join(map(str, range(self.spec.params.n_simulations)))
        return ctx


class EnsembleExchange(PatternState):
    def __init__(self, spec, iteration_offset=0):
        self._sims_done: dict[int, set[int]] = defaultdict(set)
        self._waiting: dict[int, list[int]] = defaultdict(list)
        super().__init__(spec, iteration_offset)

    @property
    def policy(self) -> PairingPolicy:
        return PairingPolicy(self.spec.params.pairing_policy)

    def _initial(self):
        return [(self.offset, 0, m) for m in range(self.spec.params.n_members)]

    def _exchange(self, it: int, group: Sequence[int]) -> Key:
        key = (it, 1, min(group))
        self._groups[key] = tuple(group)
        return key

    def _next_sim(self, it: int, member: int) -> list[Key]:
        return [(it + 1, 0, member)] if it + 1 in self.iterations else []

    def _on_complete(self, desc):
        it, m = desc.iteration, desc.member_index
        if desc.stage_index == 1:
            out = []
            for member in self._groups[desc.key]:
                out += self._next_sim(it, member)
            return out

        n = self.spec.params.n_members
        done = self._sims_done[it]
        done.add(m)
        policy = self.policy
        if policy is PairingPolicy.PER_MEMBER:
            return [self._exchange(it, (m,))]
        if policy is PairingPolicy.WHOLE_ENSEMBLE:
            return [self._exchange(it, tuple(range(n)))] if len(done) == n else []
        if policy is PairingPolicy.NEIGHBOR_BY_INDEX:
            partner = m ^ 1
            if partner >= n:
                return self._next_sim(it, m)
            return [self._exchange(it, pair) for pair in pair_for_exchange(done & {m, partner}, policy)]
        # readiness: pair in completion order, odd member out skips this exchange
        waiting = self._waiting[it]
        waiting.append(m)
        out = [self._exchange(it, pair) for pair in pair_for_exchange(waiting, policy)]
        del waiting[: 2 * len(out)]
        if len(done) == n and waiting:
            out += self._next_sim(it, waiting.pop())
        return out

    def _context(self, key):
        ctx = super()._context(key)
        group = self._groups.get(key)
        if key[1] == 1 and group is not None:
            ctx["group_size"] = len(group)
            ctx["members"] = ",".join(map(str, group))
        return ctx


_STATE_FOR = {
    Variant.ENSEMBLE_OF_PIPELINES: EnsembleOfPipelines,
    Variant.ENSEMBLE_EXCHANGE: EnsembleExchange,
    Variant.SIMULATION_ANALYSIS_LOOP: SimulationAnalysisLoop,
}


class ComposedPattern:
    """Sequential composition: each pattern starts once the previous finished.

    Iteration numbers are shifted so task ids and working directories stay
    unique across the parts.
    """

    def __init__(self, specs: Sequence[PatternSpec], registry=None):
        if not specs:
            raise InvalidSpec("compose needs at least one pattern")
        self.parts: list[PatternState] = []
        offset = 0
        for spec in specs:
            self.parts.append(instantiate(spec, registry, iteration_offset=offset))
            offset += spec.n_iterations
        self._current = 0

    @property
    def planned(self) -> int:
        return sum(p.planned for p in self.parts)

    @property
    def completed(self) -> set[Key]:
        return set().union(*(p.completed for p in self.parts))

    @property
    def emitted(self) -> set[str]:
        return set().union(*(p.emitted for p in self.parts))

    @property
    def finished(self) -> bool:
        return all(p.finished for p in self.parts)

    def max_slots(self) -> int:
        return max(p.max_slots() for p in self.parts)

    def specs(self) -> list[PatternSpec]:
        return [p.spec for p in self.parts]

    def ready_wave(self) -> list[TaskDescription]:
        wave: list[TaskDescription] = []
        while self._current < len(self.parts):
            part = self.parts[self._current]
            wave += part.ready_wave()
            if not part.finished or self._current + 1 == len(self.parts):
                break
            self._current += 1
        return wave

    def record_completion(self, record: TaskRecord) -> ComposedPattern:
        for part in self.parts:
            if part.owns(record.task_id):
                part.record_completion(record)
                return self
        raise UnknownTask(record.task_id)

    def owns(self, task_id: str) -> bool:
        return any(p.owns(task_id) for p in self.parts)

    def task(self, task_id: str) -> TaskDescription:
        for part in self.parts:
            if part.owns(task_id):
                return part.task(task_id)
        raise UnknownTask(task_id)


def instantiate(spec: PatternSpec, registry=None, *, iteration_offset: int = 0) -> PatternState:
    spec.validate(registry)
    return _STATE_FOR[Variant(spec.variant)](spec, iteration_offset)


def ready_wave(state) -> list[TaskDescription]:
    return [] if state.finished else state.ready_wave()


def record_completion(state, task: TaskRecord):
    return state.record_completion(task)


def compose(patterns: Sequence[PatternSpec], registry=None) -> ComposedPattern:
    return ComposedPattern(list(patterns), registry)
