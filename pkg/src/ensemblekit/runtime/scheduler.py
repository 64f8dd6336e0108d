"""Application-level scheduling of tasks onto pilot slots."""

from __future__ import annotations

import heapq
from collections import deque
from collections.abc import Iterable

from ..core import TaskDescription, Time


class Scheduler:
    """FIFO with first-fit skip.

    Tasks are taken in arrival order. When the head needs more slots than are
    free, later tasks that do fit are dispatched past it; the head keeps its
    place. Free slots are handed out lowest id first.
    """

    policy = "FIFO-FirstFit"

    def __init__(self, total_slots: int):
        self.total_slots = total_slots
        self.ready_queue: deque[TaskDescription] = deque()
        self._free = list(range(total_slots))

    @property
    def free_slots(self) -> int:
        return len(self._free)

    def submit(self, desc: TaskDescription) -> None:
        self.ready_queue.append(desc)

    def release(self, slots: Iterable[int]) -> None:
        for s in slots:
            heapq.heappush(self._free, s)

    def schedule_step(self, now: Time | None = None) -> list[tuple[TaskDescription, tuple[int, ...]]]:
        dispatched = []
        skipped = []
        while self.ready_queue and self._free:
            desc = self.ready_queue.popleft()
            if desc.slots_required <= len(self._free):
                slots = tuple(heapq.heappop(self._free) for _ in range(desc.slots_required))
                dispatched.append((desc, slots))
            else:
                skipped.append(desc)
        self.ready_queue.extendleft(reversed(skipped))
        return dispatched


def schedule_step(sched: Scheduler, now: Time | None = None):
    return sched.schedule_step(now)
