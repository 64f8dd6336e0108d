from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ensemblekit.errors import RunAborted  # noqa: E402
from ensemblekit.runtime.engine import Engine  # noqa: E402

from replay import check_log  # noqa: E402

_original_run = Engine.run


@pytest.fixture(autouse=True)
def replay_every_log(monkeypatch):
    """Replay-check every event log any engine produces during a test."""
    seen = []

    def run(self):
        try:
            log = _original_run(self)
        except RunAborted as exc:
            seen.append((self, exc.log, False))
            raise
        seen.append((self, log, True))
        return log

    monkeypatch.setattr(Engine, "run", run)
    yield seen
    for engine, log, finished in seen:
        check_log(log, engine.pattern, engine.pilot.total_slots, finished)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance")
        for line in verdicts:
            terminalreporter.write_line(line)
