"""Pilot-based runtime: slot pool, scheduler, backends and the run loop."""

from .backends import Backend, LocalProcessBackend, SimulatedBackend, make_backend
from .engine import Engine, run
from .events import Event, EventKind, EventLog
from .pilot import Pilot, PilotState, allocate, cancel
from .scheduler import Scheduler, schedule_step

__all__ = [
    "Backend",
    "Engine",
    "Event",
    "EventKind",
    "EventLog",
    "LocalProcessBackend",
    "Pilot",
    "PilotState",
    "Scheduler",
    "SimulatedBackend",
    "allocate",
    "cancel",
    "make_backend",
    "run",
    "schedule_step",
]
