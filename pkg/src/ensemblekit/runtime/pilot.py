from __future__ import annotations

import enum
import itertools
from collections.abc import Callable
from dataclasses import dataclass, field

from ..core import ResourceRequest, Time
from ..errors import InsufficientSlots

_ids = itertools.count()


class PilotState(str, enum.Enum):
    QUEUED = "Queued"
    ACTIVE = "Active"
    DONE = "Done"
    CANCELLED = "Cancelled"


@dataclass
class Pilot:
    """Placeholder job holding a fixed pool of slots for application-level scheduling."""

    request: ResourceRequest
    pilot_id: str = field(default_factory=lambda: f"pilot.{next(_ids):04d}")
    state: PilotState = PilotState.QUEUED
    submit_time: Time | None = None
    activation_time: Time | None = None
    # set by a run in progress so cancel() can reach it
    on_cancel: Callable[[], None] | None = field(default=None, repr=False, compare=False)

    @property
    def total_slots(self) -> int:
        return self.request.total_slots


def check_fit(pilot: Pilot, pattern) -> None:
    widest = pattern.max_slots()
    if widest > pilot.total_slots:
        raise InsufficientSlots(f"a task needs {widest} slots, pilot {pilot.pilot_id} has {pilot.total_slots}")


def allocate(request: ResourceRequest, pattern=None) -> Pilot:
    """Create a queued pilot. If ``pattern`` is given its widest task must fit."""
    pilot = Pilot(request)
    if pattern is not None:
        check_fit(pilot, pattern)
    return pilot


def cancel(pilot: Pilot) -> Pilot:
    """Cancel ``pilot``. Running tasks are terminated and their run aborts. Idempotent."""
    if pilot.state is PilotState.CANCELLED:
        return pilot
    if pilot.on_cancel is not None and pilot.state is PilotState.ACTIVE:
        pilot.on_cancel()
    else:
        pilot.state = PilotState.CANCELLED
    return pilot
