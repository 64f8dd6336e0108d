"""Declarative workload spec files.

A spec is an INI file with four kinds of sections::

    [pattern]
    variant = ensemble-of-pipelines
    n_pipelines = 24
    n_stages = 2

    [stage.create]          # one section per stage role, in stage order
    kernel = mkfile
    args = size=1024 seed={seed}
    slots = 1

    [resource]
    total_slots = 24
    backend = local         # or: simulated
    walltime = 600
    queue_wait = 0
    dispatch_latency = 0

    [run]
    seed = 0
    retry_limit = 1
    output = out/ccount

``args`` holds whitespace-separated ``key=value`` tokens; ``{member}``,
``{iteration}``, ``{stage}``, ``{slots}``, ``{group_size}``, ``{members}``,
``{seed}`` and the pattern's own parameters are substituted per task.
Unknown sections and keys are rejected. See ``docs/formats.md``.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
import shlex
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import BackendKind, ResourceRequest, RunConfig
from .errors import EnsembleError, ParseError
from .kernels import default_registry
from .patterns import EEParams, EoPParams, PairingPolicy, PatternSpec, SALParams, StageKernel, Variant

PATTERN_KEYS = {
    Variant.ENSEMBLE_OF_PIPELINES: {"n_pipelines": int, "n_stages": int},
    Variant.ENSEMBLE_EXCHANGE: {"n_members": int, "n_iterations": int, "pairing_policy": PairingPolicy},
    Variant.SIMULATION_ANALYSIS_LOOP: {"n_simulations": int, "n_analyses": int, "n_iterations": int},
}
PARAMS_CLASS = {
    Variant.ENSEMBLE_OF_PIPELINES: EoPParams,
    Variant.ENSEMBLE_EXCHANGE: EEParams,
    Variant.SIMULATION_ANALYSIS_LOOP: SALParams,
}
STAGE_KEYS = {"kernel": str, "args": str, "slots": int}
RESOURCE_KEYS = {
    "total_slots": ("total_slots", int),
    "backend": ("backend", BackendKind),
    "walltime": ("walltime_limit", float),
    "queue_wait": ("queue_wait", float),
    "dispatch_latency": ("dispatch_latency", float),
}
RUN_KEYS = {"seed": int, "retry_limit": int, "output": str}


@dataclass(frozen=True)
class WorkloadSpec:
    pattern: PatternSpec
    resource: ResourceRequest
    run: RunConfig

    def with_overrides(self, *, backend=None, slots=None, seed=None, output=None) -> WorkloadSpec:
        resource = self.resource
        if backend is not None:
            resource = dataclasses.replace(resource, backend=BackendKind(backend))
        if slots is not None:
            resource = dataclasses.replace(resource, total_slots=slots)
        run = dataclasses.replace(
            self.run,
            seed=self.run.seed if seed is None else seed,
            output=self.run.output if output is None else str(output),
        )
        return WorkloadSpec(dataclasses.replace(self.pattern, seed=run.seed), resource, run)


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return n
    return None


def _convert(text: str, section: str, key: str, raw: str, kind):
    try:
        value = kind(raw)
    except ValueError:
        raise ParseError(
            f"cannot read {raw!r} as {getattr(kind, '__name__', kind)}",
            line=_line_of(text, section, key), field=f"{section}.{key}",
        ) from None
    return value


def _section(text, parser, name, allowed) -> dict:
    out = {}
    for key, raw in parser.items(name):
        if key not in allowed:
            raise ParseError(f"unknown key {key!r}", line=_line_of(text, name, key), field=f"{name}.{key}")
        out[key] = raw
    return out


def parse_spec_text(text: str, source: str = "<spec>", registry=None) -> WorkloadSpec:
    """Parse and validate a spec; kernels are checked against ``registry``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None

    for name in parser.sections():
        if name not in ("pattern", "resource", "run") and not name.startswith("stage."):
            raise ParseError(f"unknown section [{name}]", line=_line_of(text, name), field=name)
    for required in ("pattern", "resource"):
        if not parser.has_section(required):
            raise ParseError(f"missing section [{required}]", field=required)

    pattern = dict(parser.items("pattern"))
    raw_variant = pattern.pop("variant", None)
    if raw_variant is None:
        raise ParseError("missing key 'variant'", line=_line_of(text, "pattern"), field="pattern.variant")
    try:
        variant = Variant(raw_variant)
    except ValueError:
        raise ParseError(
            f"unknown pattern variant {raw_variant!r}; expected one of {', '.join(v.value for v in Variant)}",
            line=_line_of(text, "pattern", "variant"), field="pattern.variant",
        ) from None
    allowed = PATTERN_KEYS[variant]
    params = {}
    for key, raw in pattern.items():
        if key not in allowed:
            raise ParseError(f"unknown key {key!r} for {variant.value}",
                             line=_line_of(text, "pattern", key), field=f"pattern.{key}")
        params[key] = _convert(text, "pattern", key, raw, allowed[key])

    stages = {}
    for name in parser.sections():
        if not name.startswith("stage."):
            continue
        fields = _section(text, parser, name, STAGE_KEYS)
        if "kernel" not in fields:
            raise ParseError("missing key 'kernel'", line=_line_of(text, name), field=f"{name}.kernel")
        stages[name[len("stage."):]] = StageKernel(
            kernel=fields["kernel"],
            args=tuple(shlex.split(fields.get("args", ""))),
            slots=_convert(text, name, "slots", fields.get("slots", "1"), int),
        )

    res = _section(text, parser, "resource", RESOURCE_KEYS)
    res_kwargs = {}
    for key, raw in res.items():
        attr, kind = RESOURCE_KEYS[key]
        res_kwargs[attr] = _convert(text, "resource", key, raw, kind)
    if "total_slots" not in res_kwargs:
        raise ParseError("missing key 'total_slots'", line=_line_of(text, "resource"), field="resource.total_slots")

    run_kwargs = {}
    if parser.has_section("run"):
        for key, raw in _section(text, parser, "run", RUN_KEYS).items():
            run_kwargs[key] = _convert(text, "run", key, raw, RUN_KEYS[key])

    try:
        run_cfg = RunConfig(**run_kwargs)
        spec = PatternSpec(variant, PARAMS_CLASS[variant](**params), stages, seed=run_cfg.seed)
        spec.validate(registry if registry is not None else default_registry())
        resource = ResourceRequest(**res_kwargs)
    except TypeError as exc:
        raise ParseError(f"incomplete [pattern] section: {exc}", field="pattern") from None
    return WorkloadSpec(spec, resource, run_cfg)


def parse_spec(path: str | Path, registry=None) -> WorkloadSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_spec_text(text, source=str(path), registry=registry)


def write_spec(spec: WorkloadSpec) -> str:
    p = spec.pattern
    lines = ["[pattern]", f"variant = {p.variant.value}"]
    for key in PATTERN_KEYS[p.variant]:
        value = getattr(p.params, key)
        lines.append(f"{key} = {value.value if isinstance(value, PairingPolicy) else value}")
    for role, sk in p.stage_kernels.items():
        lines += ["", f"[stage.{role}]", f"kernel = {sk.kernel}"]
        if sk.args:
            lines.append(f"args = {shlex.join(sk.args)}")
        lines.append(f"slots = {sk.slots}")
    r = spec.resource
    lines += [
        "", "[resource]",
        f"total_slots = {r.total_slots}",
        f"backend = {r.backend.value}",
        f"walltime = {r.walltime_limit!r}",
        f"queue_wait = {r.queue_wait!r}",
        f"dispatch_latency = {r.dispatch_latency!r}",
        "", "[run]",
        f"seed = {spec.run.seed}",
        f"retry_limit = {spec.run.retry_limit}",
        f"output = {spec.run.output}",
    ]
    return "\n".join(lines) + "\n"


def builtin_spec_names() -> list[str]:
    files = resources.files("ensemblekit") / "specs"
    return sorted(f.name[: -len(".spec")] for f in files.iterdir() if f.name.endswith(".spec"))


def builtin_spec_path(name: str) -> Path:
    path = Path(str(resources.files("ensemblekit") / "specs" / f"{name}.spec"))
    if not path.exists():
        raise EnsembleError(f"no built-in spec named {name!r}")
    return path
