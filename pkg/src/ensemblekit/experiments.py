"""Built-in experiment suites: sweeps of workloads over slot and task counts.

Every suite runs on the simulated backend. At ``scale_factor=1`` the sweeps
use the sizes of the original characterization runs (up to 4096 tasks);
those are cheap in virtual time. Smaller factors shrink every count for
quick checks.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

from .core import BackendKind, ResourceRequest, RunConfig
from .errors import EnsembleError
from .metrics import RunReport, ScalingMode, ScalingSeries, decompose, scaling_report
from .patterns import (
    EEParams,
    EoPParams,
    PairingPolicy,
    PatternSpec,
    SALParams,
    StageKernel,
    Variant,
    instantiate,
)
from .runtime import SimulatedBackend, allocate, run
from .specfile import WorkloadSpec

# one simulated picosecond = one virtual second
EE_SIM_DURATION = "6.0"
SAL_SIM_DURATION = "0.6"
MPI_SIM_DURATION = "6.0"
FILE_SIZE = 1024

EE_SLOTS = [20 * 2**k for k in range(8)]  # 20 .. 2560
SAL_STRONG_SLOTS = [64 * 2**k for k in range(5)]  # 64 .. 1024
SAL_WEAK_SLOTS = [64 * 2**k for k in range(7)]  # 64 .. 4096
MPI_SLOTS_PER_TASK = [1, 16, 32, 64]
VALIDATION_SIZES = [24, 48, 96, 192]


@dataclass
class ExperimentSuite:
    """A named sweep. Running it yields one series per pattern variant."""

    name: str
    mode: ScalingMode
    workloads: list[WorkloadSpec]

    def run(self) -> list[ScalingSeries]:
        reports = [run_workload(w) for w in self.workloads]
        groups: dict[str, list[RunReport]] = {}
        for r in reports:
            groups.setdefault(r.variant, []).append(r)
        return [scaling_report(rs, self.mode) for rs in groups.values()]


def run_workload(w: WorkloadSpec) -> RunReport:
    pattern = instantiate(w.pattern)
    pilot = allocate(w.resource, pattern)
    log = run(pattern, pilot, SimulatedBackend(), retry_limit=w.run.retry_limit)
    return decompose(log)


def _scaled(n: int, factor: float) -> int:
    return max(1, round(n * factor))


def _workload(pattern: PatternSpec, slots: int, **resource) -> WorkloadSpec:
    req = ResourceRequest(total_slots=slots, backend=BackendKind.SIMULATED, **resource)
    return WorkloadSpec(pattern, req, RunConfig())


def ee_pattern(n_members: int, sim_duration: str = EE_SIM_DURATION, policy=PairingPolicy.WHOLE_ENSEMBLE):
    return PatternSpec(
        Variant.ENSEMBLE_EXCHANGE,
        EEParams(n_members, 1, policy),
        {
            "simulation": StageKernel("synthetic-sim", (f"duration={sim_duration}",)),
            "exchange": StageKernel("synthetic-exchange", ("n_members={group_size}",)),
        },
    )


def sal_pattern(n_sims: int, sim_duration: str = SAL_SIM_DURATION, sim_slots: int = 1):
    return PatternSpec(
        Variant.SIMULATION_ANALYSIS_LOOP,
        SALParams(n_sims, 1, 1),
        {
            "simulation": StageKernel("synthetic-sim", (f"duration={sim_duration}", "slots={slots}"), sim_slots),
            "analysis": StageKernel("synthetic-analysis", ("n_inputs={n_simulations}",)),
        },
    )


def two_stage_kernels(first: str = "create", second: str = "count") -> dict[str, StageKernel]:
    return {
        first: StageKernel("mkfile", (f"size={FILE_SIZE}", "seed={seed}")),
        second: StageKernel("ccount", ("file=../../0/{member}/data.txt",)),
    }


def validation_patterns(n: int) -> list[PatternSpec]:
    """The same mkfile -> ccount task set expressed in each unit pattern.

    Exchange and analysis stages do the counting, one task per member, so no
    serial coupling cost is added.
    """
    create, count = two_stage_kernels().values()
    return [
        PatternSpec(Variant.ENSEMBLE_OF_PIPELINES, EoPParams(n, 2), two_stage_kernels()),
        PatternSpec(
            Variant.ENSEMBLE_EXCHANGE,
            EEParams(n, 1, PairingPolicy.PER_MEMBER),
            {"simulation": create, "exchange": count},
        ),
        PatternSpec(
            Variant.SIMULATION_ANALYSIS_LOOP,
            SALParams(n, n, 1),
            {"simulation": create, "analysis": count},
        ),
    ]


def ee_strong(f: float = 1.0) -> ExperimentSuite:
    n = _scaled(2560, f)
    slots = sorted({_scaled(s, f) for s in EE_SLOTS})
    return ExperimentSuite("ee-strong", ScalingMode.STRONG, [_workload(ee_pattern(n), s) for s in slots])


def ee_weak(f: float = 1.0) -> ExperimentSuite:
    slots = sorted({max(2, _scaled(s, f)) for s in EE_SLOTS})
    return ExperimentSuite("ee-weak", ScalingMode.WEAK, [_workload(ee_pattern(s), s) for s in slots])


def sal_strong(f: float = 1.0) -> ExperimentSuite:
    n = _scaled(1024, f)
    slots = sorted({_scaled(s, f) for s in SAL_STRONG_SLOTS})
    return ExperimentSuite("sal-strong", ScalingMode.STRONG, [_workload(sal_pattern(n), s) for s in slots])


def sal_weak(f: float = 1.0) -> ExperimentSuite:
    slots = sorted({_scaled(s, f) for s in SAL_WEAK_SLOTS})
    return ExperimentSuite("sal-weak", ScalingMode.WEAK, [_workload(sal_pattern(s), s) for s in slots])


def mpi(f: float = 1.0) -> ExperimentSuite:
    n = _scaled(64, f)
    per_task = sorted({_scaled(k, f) for k in MPI_SLOTS_PER_TASK})
    workloads = [_workload(sal_pattern(n, MPI_SIM_DURATION, k), n * k) for k in per_task]
    return ExperimentSuite("mpi", ScalingMode.MPI, workloads)


def pattern_validation(f: float = 1.0, dispatch_latency: float = 0.001, queue_wait: float = 5.0) -> ExperimentSuite:
    sizes = sorted({max(2, _scaled(n, f)) for n in VALIDATION_SIZES})
    workloads = [
        _workload(p, n, dispatch_latency=dispatch_latency, queue_wait=queue_wait)
        for n in sizes
        for p in validation_patterns(n)
    ]
    return ExperimentSuite("pattern-validation", ScalingMode.VALIDATION, workloads)


SUITES: dict[str, Callable[..., ExperimentSuite]] = {
    "pattern-validation": pattern_validation,
    "ee-strong": ee_strong,
    "ee-weak": ee_weak,
    "sal-strong": sal_strong,
    "sal-weak": sal_weak,
    "mpi": mpi,
}


def build_suite(name: str, scale_factor: float = 1.0) -> ExperimentSuite:
    if name not in SUITES:
        raise EnsembleError(f"unknown experiment {name!r}; choose from {', '.join(SUITES)}")
    if not 0 < scale_factor <= 1:
        raise EnsembleError(f"scale factor must be in (0, 1], got {scale_factor}")
    return SUITES[name](scale_factor)


def run_suite(name: str, scale_factor: float = 1.0) -> list[ScalingSeries]:
    return build_suite(name, scale_factor).run()

