"""Run event log and its JSON-lines record format.

Every event is one line::

    {"t": 1.5, "kind": "TaskStarted", "task": "i0000-s00-m00003", "slots": [2], ...}

``t`` is seconds from run start as a float, ``task`` is ``null`` for
engine/pilot events and ``slots`` is ``[]`` when not applicable. Further keys
depend on the kind and are written in sorted order; see ``docs/formats.md``.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..core import Time


class EventKind(str, enum.Enum):
    ENGINE_STARTED = "EngineStarted"
    PILOT_SUBMITTED = "PilotSubmitted"
    PILOT_ACTIVE = "PilotActive"
    PATTERN_EMITTED = "PatternEmitted"
    TASK_SCHEDULED = "TaskScheduled"
    TASK_STARTED = "TaskStarted"
    TASK_ENDED = "TaskEnded"
    PATTERN_FINISHED = "PatternFinished"
    PILOT_CANCELLED = "PilotCancelled"
    ENGINE_STOPPED = "EngineStopped"


@dataclass(frozen=True)
class Event:
    time: Time
    kind: EventKind
    task_id: str | None = None
    slots: tuple[int, ...] = ()
    data: Mapping[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "t": float(self.time),
            "kind": self.kind.value,
            "task": self.task_id,
            "slots": list(self.slots),
        }
        for key in sorted(self.data):
            value = self.data[key]
            rec[key] = value if isinstance(value, (str, int, type(None), list)) else float(value)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Event:
        rec = dict(rec)
        t = rec.pop("t")
        kind = EventKind(rec.pop("kind"))
        task = rec.pop("task", None)
        slots = tuple(rec.pop("slots", ()))
        return cls(t, kind, task, slots, rec)


class EventLog:
    """Ordered events of one run. Timestamps never decrease."""

    def __init__(self, events: Iterable[Event] = ()):
        self.events: list[Event] = []
        for ev in events:
            self.append(ev)

    def append(self, event: Event) -> Event:
        if self.events and event.time < self.events[-1].time:
            raise ValueError(
                f"event {event.kind.value} at {event.time} precedes {self.events[-1].time}"
            )
        self.events.append(event)
        return event

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, *kinds: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    def first(self, kind: EventKind) -> Event | None:
        return next((e for e in self.events if e.kind is kind), None)

    def ordering(self) -> list[tuple[str, str | None, tuple[int, ...]]]:
        """Event sequence without timestamps, for order comparisons."""
        return [(e.kind.value, e.task_id, e.slots) for e in self.events]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record(), separators=(",", ":")) + "\n" for e in self.events)

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl())
        return path

    @classmethod
    def from_jsonl(cls, text: str) -> EventLog:
        return cls(Event.from_record(json.loads(line)) for line in text.splitlines() if line.strip())

    @classmethod
    def load(cls, path: str | Path) -> EventLog:
        return cls.from_jsonl(Path(path).read_text())
