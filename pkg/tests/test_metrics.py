from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemblekit import (
    EEParams,
    EoPParams,
    PatternSpec,
    ResourceRequest,
    SALParams,
    StageKernel,
    Variant,
    allocate,
    instantiate,
)
from ensemblekit.errors import IncompleteLog, MixedModes, WalltimeExceeded
from ensemblekit.metrics import OVERHEAD_COLUMNS, ScalingMode, decompose, mpi_report, scaling_report
from ensemblekit.runtime import EventLog, SimulatedBackend, run

from workloads import TABLE_ARG, random_instance, run_engine, table_registry


def simulate(spec, slots, **resource):
    pattern = instantiate(spec)
    return run(pattern, allocate(ResourceRequest(slots, **resource), pattern), SimulatedBackend())


def eop(n, m=1, kernel=None):
    kernel = kernel or StageKernel("synthetic-sim", ("duration=1.0",))
    return PatternSpec(Variant.ENSEMBLE_OF_PIPELINES, EoPParams(n, m), {"work": kernel})


def ee(n, sim="6.0"):
    return PatternSpec(
        Variant.ENSEMBLE_EXCHANGE, EEParams(n),
        {"simulation": StageKernel("synthetic-sim", (f"duration={sim}",)),
         "exchange": StageKernel("synthetic-exchange", ("n_members={group_size}",))},
    )


def sal(n, sim_slots=1, sim="6.0"):
    return PatternSpec(
        Variant.SIMULATION_ANALYSIS_LOOP, SALParams(n),
        {"simulation": StageKernel("synthetic-sim", (f"duration={sim}", "slots={slots}"), sim_slots),
         "analysis": StageKernel("synthetic-analysis", ("n_inputs={n_simulations}",))},
    )


def total(report):
    return report.core_overhead + report.pattern_overhead + report.runtime_overhead + report.execution_time


def test_zero_overhead_run():
    report = decompose(simulate(eop(4, 2), 4))
    assert report.ttc == 2
    assert (report.core_overhead, report.pattern_overhead, report.runtime_overhead) == (0, 0, 0)
    assert report.execution_time == 2
    assert report.per_stage["work"].duration == 2


def test_queue_wait_is_core_overhead():
    report = decompose(simulate(eop(4), 4, queue_wait=7.5))
    assert report.core_overhead == Fraction(15, 2)
    assert report.ttc == Fraction(17, 2)


def test_pattern_overhead_grows_with_tasks_core_stays():
    reports = [decompose(simulate(eop(n), n, dispatch_latency=0.01, queue_wait=5.0)) for n in (24, 48, 96, 192)]
    assert [r.pattern_overhead for r in reports] == [Fraction(n, 100) for n in (24, 48, 96, 192)]
    assert {r.core_overhead for r in reports} == {5}
    assert {r.execution_time for r in reports} == {1}


def test_creation_hidden_behind_execution_is_not_overhead():
    # pipeline 1 is slow, so pipeline 0's second stage is created while it runs
    durations = {(0, 0, 0): Fraction(1), (0, 0, 1): Fraction(3), (0, 1, 0): Fraction(1), (0, 1, 1): Fraction(1)}
    registry = table_registry(durations)
    spec = PatternSpec(Variant.ENSEMBLE_OF_PIPELINES, EoPParams(2, 2), {"work": StageKernel("table", (TABLE_ARG,))})
    pattern = instantiate(spec, registry)
    log = run(pattern, allocate(ResourceRequest(2, dispatch_latency=0.5)), SimulatedBackend(), registry=registry)
    report = decompose(log)
    # creation spans: [0,1) exposed, [2,2.5) hidden, [4,4.5) exposed
    assert report.pattern_overhead == Fraction(3, 2)
    assert report.ttc == Fraction(11, 2)
    assert report.execution_time == 4


def test_kernel_swap_leaves_overheads_alone():
    fast = decompose(simulate(eop(8, 2, StageKernel("sleep", ("duration=0.5",))), 4, dispatch_latency=0.01, queue_wait=3))
    slow = decompose(simulate(eop(8, 2, StageKernel("synthetic-sim", ("duration=2",))), 4, dispatch_latency=0.01, queue_wait=3))
    for name in ("core_overhead", "pattern_overhead", "runtime_overhead"):
        assert getattr(fast, name) == getattr(slow, name)
    assert fast.execution_time != slow.execution_time


@pytest.mark.parametrize("tasks,slots", [(8, 2), (12, 3), (64, 16), (100, 100), (40, 8)])
def test_strong_scaling_law(tasks, slots):
    d = Fraction("1.5")
    report = decompose(simulate(eop(tasks, kernel=StageKernel("synthetic-sim", ("duration=1.5",))), slots))
    assert report.execution_time == Fraction(tasks, slots) * d


@pytest.mark.parametrize("n", [1, 7, 64, 500])
def test_weak_scaling_law(n):
    assert decompose(simulate(eop(n), n)).execution_time == 1


@pytest.mark.parametrize("slots", [2, 5, 20])
def test_serial_stage_is_members_times_cost(slots):
    report = decompose(simulate(ee(40), slots))
    assert report.stage_time("exchange") == Fraction(40, 100)
    assert report.stage_time("missing") == 0


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_components_sum_to_ttc_exactly(seed):
    report = decompose(run_engine(random_instance(random.Random(seed))))
    assert total(report) == report.ttc
    assert min(report.core_overhead, report.pattern_overhead, report.runtime_overhead) >= 0


def test_report_formats():
    report = decompose(simulate(sal(4), 2, dispatch_latency=0.5))
    d = report.to_dict()
    for col in OVERHEAD_COLUMNS + ("simulation_time", "analysis_time"):
        assert isinstance(d[col], float)
    assert d["per_stage"]["analysis"]["duration"] == pytest.approx(0.04)
    assert d["n_tasks"] == 5 and d["ensemble_size"] == 4
    table = report.to_table()
    assert table.splitlines()[0] == "simulation-analysis-loop on 2 slots, 5 tasks"
    assert "pattern_overhead" in table


def test_decompose_from_saved_log():
    log = simulate(sal(5), 2, dispatch_latency=0.1, queue_wait=2)
    exact = decompose(log)
    saved = decompose(EventLog.from_jsonl(log.to_jsonl()))
    for name in OVERHEAD_COLUMNS:
        assert float(getattr(saved, name)) == pytest.approx(float(getattr(exact, name)))


def test_aborted_run_cannot_be_decomposed():
    with pytest.raises(WalltimeExceeded) as info:
        simulate(eop(2, kernel=StageKernel("sleep", ("duration=5",))), 2, walltime_limit=1)
    with pytest.raises(IncompleteLog):
        decompose(info.value.log)


# -- series


def test_strong_series_sorted_and_checked():
    runs = [decompose(simulate(ee(40), s)) for s in (40, 10, 20)]
    series = scaling_report(runs, "strong")
    assert [p.slots for p in series.points] == [10, 20, 40]
    assert series.column("simulation_time") == [24, 12, 6]
    assert len(set(series.column("exchange_time"))) == 1
    assert series.to_records()[0]["mode"] == "strong"
    assert "strong scaling" in series.to_table()


def test_strong_series_rejects_varying_task_counts():
    runs = [decompose(simulate(ee(n), 10)) for n in (20, 40)]
    with pytest.raises(MixedModes):
        scaling_report(runs, ScalingMode.STRONG)


def test_weak_series_rejects_varying_ratio():
    runs = [decompose(simulate(ee(20), 20)), decompose(simulate(ee(40), 20))]
    with pytest.raises(MixedModes):
        scaling_report(runs, ScalingMode.WEAK)


def test_series_reject_mixed_variants_and_kernels():
    with pytest.raises(MixedModes):
        scaling_report([decompose(simulate(ee(4), 4)), decompose(simulate(sal(4), 4))], "weak")
    swapped = eop(4, kernel=StageKernel("sleep", ("duration=1",)))
    with pytest.raises(MixedModes):
        scaling_report([decompose(simulate(eop(4), 4)), decompose(simulate(swapped, 4))], "strong")
    with pytest.raises(MixedModes):
        scaling_report([], "strong")


def test_mpi_series_durations():
    runs = [decompose(simulate(sal(64, k), 64 * k)) for k in (1, 16, 32, 64)]
    series = mpi_report(runs)
    assert [p.slots_per_task for p in series.points] == [1, 16, 32, 64]
    assert series.column("simulation_time") == [Fraction(x) for x in ("6.0", "0.375", "0.1875", "0.09375")]


def test_single_point_series():
    series = mpi_report([decompose(simulate(sal(4, 2), 8))])
    assert len(series.points) == 1
    assert series.points[0].slots_per_task == 2


def test_mpi_series_rejects_mixed_kernels():
    swapped = PatternSpec(
        Variant.SIMULATION_ANALYSIS_LOOP, SALParams(4),
        {"simulation": StageKernel("sleep", ("duration=6",)),
         "analysis": StageKernel("synthetic-analysis", ("n_inputs=4",))},
    )
    with pytest.raises(MixedModes):
        mpi_report([decompose(simulate(sal(4), 4)), decompose(simulate(swapped, 4))])
