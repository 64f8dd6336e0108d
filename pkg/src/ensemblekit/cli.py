"""Command-line front end.

``ensemblekit run <spec>`` executes a workload spec and writes
``events.jsonl``, ``report.json`` and ``report.txt`` to the output
directory. ``ensemblekit experiment <name>`` runs a built-in scaling sweep
on the simulated backend. ``ensemblekit report <events.jsonl>`` rebuilds
the time-to-completion breakdown from a saved event log.

Exit codes: 0 on success, 1 when a run fails, 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import BackendKind
from .errors import EnsembleError, IncompleteLog, RunAborted
from .experiments import SUITES, build_suite
from .metrics import decompose
from .patterns import instantiate
from .runtime import EventLog, allocate, make_backend, run
from .specfile import WorkloadSpec, builtin_spec_names, builtin_spec_path, parse_spec

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_USAGE = 2

log = logging.getLogger("ensemblekit")


def _resolve_spec_path(name: str) -> Path:
    path = Path(name)
    if path.exists() or name not in builtin_spec_names():
        return path
    return builtin_spec_path(name)


def _write_report(out: Path, events: EventLog) -> str:
    report = decompose(events)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    table = report.to_table()
    (out / "report.txt").write_text(table + "\n")
    return table


def execute(spec: WorkloadSpec, out: Path) -> EventLog:
    """Run a parsed spec with its output rooted at ``out``."""
    pattern = instantiate(spec.pattern)
    pilot = allocate(spec.resource, pattern)
    backend = make_backend(spec.resource.backend)
    return run(pattern, pilot, backend, retry_limit=spec.run.retry_limit, workdir=out)


def cmd_run(args) -> int:
    spec = parse_spec(_resolve_spec_path(args.spec))
    spec = spec.with_overrides(backend=args.backend, slots=args.slots, seed=args.seed, output=args.out)
    out = Path(spec.run.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        events = execute(spec, out)
    except RunAborted as exc:
        if exc.log is not None:
            exc.log.dump(out / "events.jsonl")
        print(f"run failed: {exc}", file=sys.stderr)
        print(f"partial event log: {out / 'events.jsonl'}", file=sys.stderr)
        return EXIT_RUN_FAILED
    events.dump(out / "events.jsonl")
    print(_write_report(out, events))
    print(f"\nwrote {out / 'events.jsonl'}, {out / 'report.json'}, {out / 'report.txt'}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    suite = build_suite(args.name, args.scale_factor)
    out = Path(args.out) / suite.name
    out.mkdir(parents=True, exist_ok=True)
    try:
        series = suite.run()
    except RunAborted as exc:
        print(f"experiment {suite.name} failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    records = [rec for s in series for rec in s.to_records()]
    (out / "series.json").write_text(json.dumps(records, indent=2) + "\n")
    tables = "\n\n".join(s.to_table() for s in series)
    (out / "series.txt").write_text(tables + "\n")
    print(tables)
    print(f"\nwrote {out / 'series.json'}, {out / 'series.txt'}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.eventlog)
    try:
        events = EventLog.load(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read event log {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = decompose(events)
    except IncompleteLog as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ensemblekit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log engine activity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a workload spec")
    p.add_argument("spec", help="spec file, or the name of a built-in spec")
    p.add_argument("--backend", choices=[b.value for b in BackendKind])
    p.add_argument("--slots", type=int, help="override resource.total_slots")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="output directory (default: run.output)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run a built-in scaling sweep")
    p.add_argument("name", choices=list(SUITES))
    p.add_argument("--scale-factor", type=float, default=1.0, help="shrink sweep sizes, in (0, 1]")
    p.add_argument("--out", default="out", help="directory for series files (default: out)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="decompose a saved event log")
    p.add_argument("eventlog")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RunAborted as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    except EnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
