"""Ensemble workflow engine: execution patterns, kernel plugins and a pilot runtime."""

from .core import (
    BackendKind,
    ResourceRequest,
    TaskDescription,
    TaskRecord,
    TaskState,
    transition,
    validate_task,
)
from .kernels import KernelPlugin, KernelRegistry, default_registry
from .metrics import RunReport, ScalingMode, ScalingSeries, decompose, mpi_report, scaling_report
from .patterns import (
    EEParams,
    EoPParams,
    PairingPolicy,
    PatternSpec,
    SALParams,
    StageKernel,
    Variant,
    compose,
    instantiate,
)
from .runtime import EventLog, Pilot, allocate, cancel, make_backend, run

__version__ = "0.1.0"

__all__ = [
    "BackendKind",
    "EEParams",
    "EoPParams",
    "EventLog",
    "KernelPlugin",
    "KernelRegistry",
    "PairingPolicy",
    "PatternSpec",
    "Pilot",
    "ResourceRequest",
    "RunReport",
    "SALParams",
    "ScalingMode",
    "ScalingSeries",
    "StageKernel",
    "TaskDescription",
    "TaskRecord",
    "TaskState",
    "Variant",
    "allocate",
    "cancel",
    "compose",
    "decompose",
    "default_registry",
    "instantiate",
    "make_backend",
    "mpi_report",
    "run",
    "scaling_report",
    "transition",
    "validate_task",
]
