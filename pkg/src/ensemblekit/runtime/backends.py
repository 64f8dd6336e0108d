"""Execution backends: a virtual-clock simulator and real local processes.

Both feed the engine's event loop through :meth:`Backend.next_batch`, which
returns every event due at the next instant. The local backend collects
process exits on watcher threads and hands them over through a queue; that
queue is the only channel into the loop.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import os
import queue
import subprocess
import threading
import time
from abc import ABC, abstractmethod
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from ..core import BackendKind, TaskRecord, Time, exact
from ..kernels import ExecutablePlan

log = logging.getLogger(__name__)

# tie-break order of events due at the same instant
ORDER_TASK_END = 0
ORDER_TIMER = 1


@dataclass(frozen=True)
class Completion:
    task_id: str
    time: Time
    exit_status: int


@dataclass(frozen=True)
class Timer:
    time: Time
    payload: Any


@dataclass(frozen=True)
class CancelRequest:
    time: Time


class Backend(ABC):
    kind: BackendKind

    @abstractmethod
    def start(self) -> None:
        """Start the clock at zero."""

    @abstractmethod
    def now(self) -> Time: ...

    @abstractmethod
    def number(self, value) -> Time:
        """Convert a configured duration into this backend's time type."""

    def advance(self, seconds: Time) -> None:
        """Let ``seconds`` pass with nothing running (pilot queue wait)."""

    def creation_cost(self, n_tasks: int, latency: Time) -> Time:
        """Virtual time charged for creating ``n_tasks`` tasks."""
        return self.number(0)

    @abstractmethod
    def launch(self, record: TaskRecord, plan: ExecutablePlan, workdir: Path | None) -> None: ...

    @abstractmethod
    def add_timer(self, at: Time, payload: Any) -> None: ...

    @abstractmethod
    def next_batch(self, deadline: Time) -> tuple[Time, list] | None:
        """Events due at the next instant, or ``None`` if ``deadline`` passes first."""

    @abstractmethod
    def request_cancel(self) -> None:
        """Thread-safe: ask the loop to cancel the run."""

    @abstractmethod
    def terminate_all(self) -> list[str]:
        """Stop every running task; return their ids."""

    def close(self) -> None:
        pass


class SimulatedBackend(Backend):
    """Deterministic discrete-event backend with an exact rational clock.

    ``fail_attempts`` maps a task id to how many of its first attempts exit
    with status 1, for exercising the retry path.
    """

    kind = BackendKind.SIMULATED

    def __init__(self, fail_attempts: Mapping[str, int] | None = None):
        self.fail_attempts = dict(fail_attempts or {})
        self._clock = Fraction(0)
        self._heap: list = []
        self._seq = itertools.count()
        self._running: dict[str, Fraction] = {}
        self._cancel = threading.Event()

    def start(self):
        self._clock = Fraction(0)

    def now(self):
        return self._clock

    def number(self, value):
        return exact(value)

    def advance(self, seconds):
        self._clock += exact(seconds)

    def creation_cost(self, n_tasks, latency):
        return n_tasks * exact(latency)

    def launch(self, record, plan, workdir):
        end = self._clock + plan.seconds
        status = 1 if record.attempts <= self.fail_attempts.get(record.task_id, 0) else 0
        self._running[record.task_id] = end
        self._push(end, ORDER_TASK_END, record.task_id, Completion(record.task_id, end, status))

    def add_timer(self, at, payload):
        self._push(exact(at), ORDER_TIMER, "", Timer(exact(at), payload))

    def _push(self, at, order, key, item):
        heapq.heappush(self._heap, (at, order, key, next(self._seq), item))

    def next_batch(self, deadline):
        if self._cancel.is_set():
            return self._clock, [CancelRequest(self._clock)]
        if not self._heap:
            raise RuntimeError("simulation stalled: nothing running and nothing scheduled")
        t = self._heap[0][0]
        if t > deadline:
            self._clock = exact(deadline)
            return None
        items = []
        while self._heap and self._heap[0][0] == t:
            item = heapq.heappop(self._heap)[-1]
            if isinstance(item, Completion):
                self._running.pop(item.task_id, None)
            items.append(item)
        self._clock = t
        return t, items

    def request_cancel(self):
        self._cancel.set()

    def terminate_all(self):
        ids = sorted(self._running)
        self._running.clear()
        self._heap = [e for e in self._heap if not isinstance(e[-1], Completion)]
        heapq.heapify(self._heap)
        return ids


class LocalProcessBackend(Backend):
    """Runs kernel commands as child processes in per-task working directories.

    stdout and stderr of each task go to ``stdout.txt`` / ``stderr.txt`` in its
    directory.
    """

    kind = BackendKind.LOCAL_PROCESS

    def __init__(self):
        self._t0 = time.perf_counter()
        self._events: queue.Queue = queue.Queue()
        self._procs: dict[str, subprocess.Popen] = {}
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    def start(self):
        self._t0 = time.perf_counter()

    def now(self):
        return time.perf_counter() - self._t0

    def number(self, value):
        return float(value)

    def launch(self, record, plan, workdir):
        if workdir is None:
            raise ValueError("local-process backend needs a working directory")
        workdir.mkdir(parents=True, exist_ok=True)
        with open(workdir / "stdout.txt", "wb") as out, open(workdir / "stderr.txt", "wb") as err:
            proc = subprocess.Popen(
                list(plan.command), cwd=workdir, stdout=out, stderr=err,
                stdin=subprocess.DEVNULL, start_new_session=True,
            )
        with self._lock:
            self._procs[record.task_id] = proc
        watcher = threading.Thread(target=self._watch, args=(record.task_id, proc), daemon=True)
        watcher.start()
        self._threads.append(watcher)

    def _watch(self, task_id, proc):
        status = proc.wait()
        t = self.now()
        with self._lock:
            if self._procs.get(task_id) is not proc:
                return  # terminated by the engine
            del self._procs[task_id]
        self._events.put(Completion(task_id, t, status))

    def add_timer(self, at, payload):
        self._events.put(Timer(at, payload))

    def next_batch(self, deadline):
        try:
            first = self._events.get(timeout=max(0.0, deadline - self.now()))
        except queue.Empty:
            return None
        items = [first]
        while True:
            try:
                items.append(self._events.get_nowait())
            except queue.Empty:
                break
        items.sort(key=lambda it: (getattr(it, "time", 0.0), getattr(it, "task_id", "")))
        return self.now(), items

    def request_cancel(self):
        self._events.put(CancelRequest(self.now()))

    def terminate_all(self):
        with self._lock:
            procs = dict(self._procs)
            self._procs.clear()
        for proc in procs.values():
            _terminate(proc)
        return sorted(procs)

    def close(self):
        self.terminate_all()
        for t in self._threads:
            t.join(timeout=1.0)


def _terminate(proc: subprocess.Popen) -> None:
    if proc.poll() is not None:
        return
    try:
        os.killpg(proc.pid, 15)
    except ProcessLookupError:
        return
    try:
        proc.wait(timeout=2.0)
    except subprocess.TimeoutExpired:
        os.killpg(proc.pid, 9)
        proc.wait()


def make_backend(kind: BackendKind | str, **options) -> Backend:
    kind = BackendKind(kind)
    if kind is BackendKind.SIMULATED:
        return SimulatedBackend(**options)
    return LocalProcessBackend(**options)
