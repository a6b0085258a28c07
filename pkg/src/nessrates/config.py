"""Run configuration: a TOML file with flat dotted keys plus environment overrides.

Example::

    model = "vsystem"
    task = "rates"
    vsystem.J = 2e-5
    partition.builtin = "grouped"

Any key may be overridden from the environment as ``NESSRATE_<KEY>`` with
dots written as double underscores, e.g. ``NESSRATE_VSYSTEM__J=3e-5``.
Environment values are parsed as TOML values and fall back to plain strings.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .spinboson import SBParams
from .vsystem import VParams

ENV_PREFIX = "NESSRATE_"
MODELS = ("vsystem", "spinboson", "custom-matrices")
TASKS = ("ness", "rates", "dynamics", "markov", "sweep")
GRIDS = ("linear", "log")

#: Derived V-system knobs accepted in sweeps: the splitting eps_2 - eps_1 and
#: a common value for Gamma_C2 and Gamma_Df.
VSYSTEM_ALIASES = ("Delta", "Gamma")

TOP_KEYS = {"model", "task", "output_dir", "seed", "route", "full_scale"}
SECTION_KEYS = {
    "partition": {"builtin", "groups", "names"},
    "custom": {"path"},
    "dynamics": {"initial", "target", "eta", "dt", "t_final", "tf_factor", "alpha_dip"},
    "sweep": {"parameter", "grid", "start", "stop", "num", "values",
              "parameter2", "grid2", "start2", "stop2", "num2", "values2"},
}
MODEL_FIELDS = {
    "vsystem": {f.name for f in dataclasses.fields(VParams)} | set(VSYSTEM_ALIASES),
    "spinboson": {f.name for f in dataclasses.fields(SBParams)},
}


def flatten(tree: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    """Nested tables to ``{"a.b.c": value}``."""
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _parse_env_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            dotted = key[len(ENV_PREFIX):].replace("__", ".")
            out[_canonical_key(dotted)] = _parse_env_value(value)
    return out


def _canonical_key(dotted: str) -> str:
    """Map case-insensitive environment keys back onto schema spelling."""
    parts = dotted.split(".")
    head = parts[0].lower()
    if len(parts) == 1:
        return head
    rest = ".".join(parts[1:])
    fields = MODEL_FIELDS.get(head) or SECTION_KEYS.get(head, set())
    for f in fields:
        if f.lower() == rest.lower():
            return f"{head}.{f}"
    return f"{head}.{rest}"


@dataclass(frozen=True)
class Grid:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    model: str = "vsystem"
    task: str = "rates"
    output_dir: str = "nessrates-out"
    seed: int = 0
    route: str = "linear-solve"
    full_scale: bool = False
    params: dict[str, Any] = field(default_factory=dict)
    partition: dict[str, Any] = field(default_factory=dict)
    custom: dict[str, Any] = field(default_factory=dict)
    dynamics: dict[str, Any] = field(default_factory=dict)
    sweep: tuple[Grid, ...] = ()

    def as_flat(self) -> dict[str, Any]:
        """Flat dotted view used for manifests."""
        out = {k: getattr(self, k) for k in sorted(TOP_KEYS)}
        if self.model in MODEL_FIELDS:
            out.update({f"{self.model}.{k}": v for k, v in self.params.items()})
        for sec in ("partition", "custom", "dynamics"):
            out.update({f"{sec}.{k}": v for k, v in getattr(self, sec).items()})
        for i, g in enumerate(self.sweep, start=1):
            out[f"sweep.axis{i}"] = {"parameter": g.parameter, "values": list(g.values)}
        return out


def _grid(flat: Mapping[str, Any], suffix: str) -> Grid | None:
    key = f"sweep.parameter{suffix}"
    if key not in flat:
        extra = [k for k in flat if k.startswith("sweep.") and k.endswith(suffix) and suffix]
        if extra:
            raise ConfigError(f"{extra[0]} given without {key}")
        return None
    param = str(flat[key])
    if f"sweep.values{suffix}" in flat:
        values = [float(v) for v in flat[f"sweep.values{suffix}"]]
    else:
        try:
            start, stop, num = (flat[f"sweep.{k}{suffix}"] for k in ("start", "stop", "num"))
        except KeyError as exc:
            raise ConfigError(f"sweep axis {param!r} needs values or start/stop/num ({exc.args[0]} missing)") from None
        kind = flat.get(f"sweep.grid{suffix}", "linear")
        if kind not in GRIDS:
            raise ConfigError(f"sweep.grid{suffix} must be one of {GRIDS}, got {kind!r}")
        if int(num) < 1:
            raise ConfigError("sweep grids must be nonempty")
        if kind == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log grids need positive start and stop")
            values = np.geomspace(float(start), float(stop), int(num)).tolist()
        else:
            values = np.linspace(float(start), float(stop), int(num)).tolist()
    if not values:
        raise ConfigError("sweep grids must be nonempty")
    diffs = np.diff(values)
    if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError(f"sweep grid for {param!r} is not strictly monotone")
    return Grid(param, tuple(values))


def from_flat(flat: Mapping[str, Any]) -> RunConfig:
    """Validate a flat dotted mapping and build a :class:`RunConfig`."""
    flat = dict(flat)
    model = flat.get("model", "vsystem")
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; expected one of {MODELS}")
    task = flat.get("task", "rates")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")

    params, sections = {}, {name: {} for name in SECTION_KEYS}
    for key, value in flat.items():
        if "." not in key:
            if key not in TOP_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            continue
        head, rest = key.split(".", 1)
        if head in MODEL_FIELDS:
            if rest not in MODEL_FIELDS[head]:
                raise ConfigError(f"unknown key {key!r}")
            if head != model:
                raise ConfigError(f"key {key!r} does not apply to model {model!r}")
            params[rest] = value
        elif head in SECTION_KEYS:
            if rest not in SECTION_KEYS[head]:
                raise ConfigError(f"unknown key {key!r}")
            sections[head][rest] = value
        else:
            raise ConfigError(f"unknown key {key!r}")

    if model == "custom-matrices" and "path" not in sections["custom"]:
        raise ConfigError("model custom-matrices needs custom.path")
    axes = tuple(g for g in (_grid(flat, ""), _grid(flat, "2")) if g is not None)
    if task == "sweep" and not axes:
        raise ConfigError("task sweep needs sweep.parameter and a grid")
    for g in axes:
        head, _, rest = g.parameter.partition(".")
        if head != model or rest not in MODEL_FIELDS.get(head, ()):
            raise ConfigError(f"sweep parameter {g.parameter!r} is not a {model} parameter")
    if task == "markov" and "dt" not in sections["dynamics"]:
        raise ConfigError("task markov needs dynamics.dt")

    return RunConfig(
        model=model, task=task,
        output_dir=str(flat.get("output_dir", "nessrates-out")),
        seed=int(flat.get("seed", 0)),
        route=str(flat.get("route", "linear-solve")),
        full_scale=bool(flat.get("full_scale", False)),
        params=params,
        partition=sections["partition"], custom=sections["custom"], dynamics=sections["dynamics"],
        sweep=axes,
    )


def load(path: str | os.PathLike | None = None, environ: Mapping[str, str] | None = None,
         overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """File values, then environment overrides, then explicit ``overrides``."""
    flat: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                flat.update(flatten(tomllib.load(fh)))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
    flat.update(env_overrides(environ))
    if overrides:
        flat.update(overrides)
    cfg = from_flat(flat)
    if cfg.model == "custom-matrices" and path is not None:
        p = Path(cfg.custom["path"])
        if not p.is_absolute():
            cfg = dataclasses.replace(cfg, custom={**cfg.custom, "path": str(Path(path).parent / p)})
    return cfg
