"""Kernel plugins: named executables resolved per backend.

A kernel turns ``(args, backend)`` into an :class:`ExecutablePlan`. For the
local-process backend the plan is a command line; for the simulated backend
it is a duration model in virtual seconds (one simulated picosecond of the
original workloads is taken as one virtual second).
"""

from __future__ import annotations

import shutil
import sys
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .core import BackendKind, parse_arg_tokens
from .errors import BadArgs, DuplicateKernelName, UnknownKernel


@dataclass(frozen=True)
class ArgSpec:
    flag: str
    required: bool = True
    description: str = ""
    default: str | None = None


@dataclass(frozen=True)
class DurationModel:
    """``base + per_unit * units`` virtual seconds.

    ``unit_arg`` names the argument that supplied ``units`` (``None`` for a
    fixed duration).
    """

    base: Fraction = Fraction(0)
    per_unit: Fraction = Fraction(0)
    units: int = 0
    unit_arg: str | None = None

    @property
    def seconds(self) -> Fraction:
        return self.base + self.per_unit * self.units


@dataclass(frozen=True)
class ExecutablePlan:
    backend: BackendKind
    command: tuple[str, ...] = ()
    duration: DurationModel | None = None
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.backend is BackendKind.LOCAL_PROCESS and not self.command:
            raise BadArgs("local-process plan needs a non-empty command")
        if self.backend is BackendKind.SIMULATED:
            if self.duration is None or self.duration.seconds < 0:
                raise BadArgs("simulated plan needs a non-negative duration")

    @property
    def seconds(self) -> Fraction:
        return self.duration.seconds if self.duration is not None else Fraction(0)


Resolver = Callable[[dict[str, str], BackendKind], ExecutablePlan]


@dataclass(frozen=True)
class KernelPlugin:
    name: str
    arg_schema: tuple[ArgSpec, ...]
    resolver: Resolver = field(compare=False)
    description: str = ""

    def bind_args(self, args: Mapping[str, str]) -> dict[str, str]:
        """Check ``args`` against the schema and fill in defaults."""
        known = {a.flag: a for a in self.arg_schema}
        unknown = sorted(set(args) - set(known))
        if unknown:
            raise BadArgs(f"kernel {self.name!r}: unknown argument(s) {', '.join(unknown)}")
        bound: dict[str, str] = {}
        for spec in self.arg_schema:
            if spec.flag in args:
                bound[spec.flag] = str(args[spec.flag])
            elif spec.required:
                raise BadArgs(f"kernel {self.name!r}: missing required argument {spec.flag!r}")
            elif spec.default is not None:
                bound[spec.flag] = spec.default
        return bound

    def resolve(self, args: Mapping[str, str], backend: BackendKind) -> ExecutablePlan:
        return self.resolver(self.bind_args(args), BackendKind(backend))


class KernelRegistry:
    """Name -> plugin map. Built before a run and only read afterwards."""

    def __init__(self, plugins=()):
        self._plugins: dict[str, KernelPlugin] = {}
        for plugin in plugins:
            self.register(plugin)

    def register(self, plugin: KernelPlugin) -> KernelRegistry:
        if plugin.name in self._plugins:
            raise DuplicateKernelName(plugin.name)
        self._plugins[plugin.name] = plugin
        return self

    def lookup(self, name: str) -> KernelPlugin:
        try:
            return self._plugins[name]
        except KeyError:
            raise UnknownKernel(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._plugins

    def names(self) -> list[str]:
        return sorted(self._plugins)

    def resolve(self, name: str, args, backend: BackendKind) -> ExecutablePlan:
        if not isinstance(args, Mapping):
            args = parse_arg_tokens(args)
        return self.lookup(name).resolve(args, backend)


@dataclass(frozen=True)
class KernelDefaults:
    """Costs used when a spec leaves them out."""

    cost_per_member: str = "0.01"
    cost_per_input: str = "0.01"
    file_duration: str = "1.0"


def _number(args: dict[str, str], key: str, kernel: str) -> Fraction:
    try:
        value = Fraction(args[key])
    except (ValueError, ZeroDivisionError):
        raise BadArgs(f"kernel {kernel!r}: {key}={args[key]!r} is not a number") from None
    if value < 0:
        raise BadArgs(f"kernel {kernel!r}: {key} must be non-negative")
    return value


def _count(args: dict[str, str], key: str, kernel: str, minimum: int = 0) -> int:
    try:
        value = int(args[key])
    except ValueError:
        raise BadArgs(f"kernel {kernel!r}: {key}={args[key]!r} is not an integer") from None
    if value < minimum:
        raise BadArgs(f"kernel {kernel!r}: {key} must be >= {minimum}")
    return value


def _tool(*argv: str) -> tuple[str, ...]:
    return (sys.executable, "-m", "ensemblekit.tools", *argv)


def _sleep_command(seconds: Fraction) -> tuple[str, ...]:
    text = format(float(seconds), ".6f")
    exe = shutil.which("sleep")
    if exe:
        return (exe, text)
    return (sys.executable, "-c", f"import time; time.sleep({text})")


def _plan(backend: BackendKind, model: DurationModel, command=None, **io) -> ExecutablePlan:
    if backend is BackendKind.SIMULATED:
        return ExecutablePlan(backend, duration=model, **io)
    return ExecutablePlan(backend, command=command or _sleep_command(model.seconds), duration=model, **io)


def _sleep(args, backend):
    return _plan(backend, DurationModel(base=_number(args, "duration", "sleep")))


def _mkfile(args, backend):
    size = _count(args, "size", "mkfile")
    _count(args, "seed", "mkfile")
    out = args["output"]
    model = DurationModel(base=_number(args, "duration", "mkfile"))
    cmd = _tool("mkfile", "--size", str(size), "--seed", args["seed"], "--output", out)
    return _plan(backend, model, cmd, outputs=(out,))


def _ccount(args, backend):
    src = args["file"]
    model = DurationModel(base=_number(args, "duration", "ccount"))
    return _plan(backend, model, _tool("ccount", "--input", src), inputs=(src,))


def _synthetic_sim(args, backend):
    # multi-slot runs shrink linearly with the number of cores
    slots = _count(args, "slots", "synthetic-sim", minimum=1)
    model = DurationModel(base=_number(args, "duration", "synthetic-sim") / slots)
    return _plan(backend, model)


def _linear(kernel: str, count_key: str, cost_key: str):
    def resolver(args, backend):
        model = DurationModel(
            per_unit=_number(args, cost_key, kernel),
            units=_count(args, count_key, kernel),
            unit_arg=count_key,
        )
        return _plan(backend, model)

    return resolver


def builtin_kernels(defaults: KernelDefaults | None = None) -> list[KernelPlugin]:
    d = defaults or KernelDefaults()
    return [
        KernelPlugin(
            "sleep",
            (ArgSpec("duration", description="seconds to sleep"),),
            _sleep,
            "wall-clock sleep; simulated as a fixed duration",
        ),
        KernelPlugin(
            "mkfile",
            (
                ArgSpec("size", description="number of random characters to write"),
                ArgSpec("seed", False, "PRNG seed for the file content", "0"),
                ArgSpec("output", False, "file name, relative to the task directory", "data.txt"),
                ArgSpec("duration", False, "simulated duration", d.file_duration),
            ),
            _mkfile,
            "write a file of random characters",
        ),
        KernelPlugin(
            "ccount",
            (
                ArgSpec("file", description="file to count, relative to the task directory"),
                ArgSpec("duration", False, "simulated duration", d.file_duration),
            ),
            _ccount,
            "print the number of characters in a file",
        ),
        KernelPlugin(
            "synthetic-sim",
            (
                ArgSpec("duration", description="single-core duration"),
                ArgSpec("slots", False, "cores the task runs on", "1"),
            ),
            _synthetic_sim,
            "stand-in for an MD engine; duration / slots",
        ),
        KernelPlugin(
            "synthetic-exchange",
            (
                ArgSpec("n_members", description="members taking part in the exchange"),
                ArgSpec("cost_per_member", False, "serial cost per member", d.cost_per_member),
            ),
            _linear("synthetic-exchange", "n_members", "cost_per_member"),
            "serial exchange, linear in members",
        ),
        KernelPlugin(
            "synthetic-analysis",
            (
                ArgSpec("n_inputs", description="simulation outputs analysed"),
                ArgSpec("cost_per_input", False, "serial cost per input", d.cost_per_input),
            ),
            _linear("synthetic-analysis", "n_inputs", "cost_per_input"),
            "serial analysis, linear in inputs",
        ),
    ]


def default_registry(defaults: KernelDefaults | None = None) -> KernelRegistry:
    return KernelRegistry(builtin_kernels(defaults))


def register(registry: KernelRegistry, plugin: KernelPlugin) -> KernelRegistry:
    return registry.register(plugin)


def resolve(registry: KernelRegistry, name: str, args, backend: BackendKind) -> ExecutablePlan:
    return registry.resolve(name, args, backend)
