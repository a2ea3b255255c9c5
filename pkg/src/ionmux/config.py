"""Run-configuration grammar, presets, and spec construction.

Configs are hierarchical key/value YAML with unit-suffixed physical
quantities ("13 ns", "12 km").  The schema is strict: unknown keys and
unit-less physical values are rejected with a diagnostic naming the key.
Presets ship as data files so calibration values are auditable.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .atomic import AtomicParams
from .engine import Strategy
from .errors import ConfigError
from .protocol import EfficiencyChain, MemoryParams, ProtocolSpec, \
    fiber_transmission

_TIME_UNITS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3, "s": 1.0}
_LENGTH_UNITS = {"m": 1.0, "km": 1000.0}
_SPEED_UNITS = {"m/s": 1.0}


def parse_quantity(value, kind: str, key: str) -> float:
    """Parse a unit-suffixed quantity into base SI units."""
    units = {"time": _TIME_UNITS, "length": _LENGTH_UNITS,
             "speed": _SPEED_UNITS}[kind]
    if isinstance(value, str) and value.strip() in ("inf", "infinity"):
        return math.inf
    if not isinstance(value, str):
        raise ConfigError(
            f"{key}: physical quantity {value!r} needs a unit suffix "
            f"({'/'.join(units)})")
    parts = value.strip().split()
    if len(parts) != 2 or parts[1] not in units:
        raise ConfigError(
            f"{key}: cannot parse quantity {value!r}; expected "
            f"'<number> <{'|'.join(units)}>'")
    try:
        num = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"{key}: bad number in {value!r}") from exc
    return num * units[parts[1]]


def format_quantity(seconds_or_meters: float, kind: str) -> str:
    unit = {"time": "s", "length": "m", "speed": "m/s"}[kind]
    if math.isinf(seconds_or_meters):
        return "inf"
    return f"{seconds_or_meters!r} {unit}"


# schema leaf: (type, validator) where type in
# time/length/speed/float/probability/int/bool/str/intlist/numlist
_SCENARIO_SCHEMA = {
    "name": ("str", None),
    "ions": ("int", lambda v: v >= 1),
    "strategy": {
        "pulses": ("int", lambda v: v >= 1),
        "pump_after": ("intlist", None),
        "window": ("time", lambda v: v > 0),
    },
    "pulse_interval": ("time", lambda v: v > 0),
    "pump_duration": ("time", lambda v: v > 0),
    "init_pump_duration": ("time", lambda v: v >= 0),
    "shuttle_time": ("time", lambda v: v >= 0),
    "return_shuttle": ("bool", None),
    "cooling": {
        "duration": ("time", lambda v: v >= 0),
        "every_rounds": ("int", lambda v: v >= 1),
    },
    "link": {
        "length": ("length", lambda v: v >= 0),
        "fiber_speed": ("speed", lambda v: v > 0),
        "overhead": ("time", lambda v: v >= 0),
    },
    "efficiencies": {
        "collection": ("probability", None),
        "conversion": ("probability", None),
        "attenuation_db_per_km": ("float", lambda v: v >= 0),
        "detector": ("probability", None),
        "other": ("probability", None),
    },
    "memory": {
        "amplitude": ("float", lambda v: 0 < v <= 0.5),
        "tau_coh": ("time", lambda v: v > 0),
        "tau_life": ("time", lambda v: v > 0),
        "storage_time": ("time", lambda v: v >= 0),
    },
    "atomic": {
        "p_br_d": ("probability", None),
        "w_up": ("probability", None),
        "tau_p": ("time", lambda v: v > 0),
    },
}

_SCHEMA = {
    "scenario": _SCENARIO_SCHEMA,
    "bsm": {
        "efficiency": ("probability", None),
    },
    "sweep": {
        "axis": ("str", lambda v: v in ("mode_count", "ion_count")),
        "grid": ("intlist", None),
    },
    "seed": ("int", None),
    "format": ("str", lambda v: v in ("csv", "json")),
}


def _parse_leaf(key: str, spec, value):
    kind, check = spec
    if kind in ("time", "length", "speed"):
        out = parse_quantity(value, kind, key)
    elif kind == "probability":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number in [0, 1], got {value!r}")
        out = float(value)
        if not 0.0 <= out <= 1.0:
            raise ConfigError(f"{key}: value {out} outside [0, 1]")
    elif kind == "float":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        out = float(value)
    elif kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        out = value
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        out = value
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        out = value
    elif kind == "intlist":
        if not isinstance(value, list) or \
                any(not isinstance(x, int) or isinstance(x, bool) for x in value):
            raise ConfigError(f"{key}: expected a list of integers, got {value!r}")
        out = list(value)
    else:  # pragma: no cover
        raise ConfigError(f"{key}: unhandled schema kind {kind}")
    if check is not None and kind not in ("intlist",) and not check(out):
        raise ConfigError(f"{key}: value {value!r} out of accepted range")
    return out


def _resolve_tree(schema: dict, data: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in data.items():
        path = f"{prefix}{k}"
        if k not in schema:
            raise ConfigError(f"unknown configuration key {path!r}")
        sub = schema[k]
        if isinstance(sub, dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path}: expected a mapping")
            out[k] = _resolve_tree(sub, v, path + ".")
        else:
            out[k] = _parse_leaf(path, sub, v)
    return out


def _canonical_tree(schema: dict, resolved: dict) -> dict:
    """Resolved values rendered back into the config grammar (base units)."""
    out = {}
    for k, v in resolved.items():
        sub = schema[k]
        if isinstance(sub, dict):
            out[k] = _canonical_tree(sub, v)
        elif sub[0] in ("time", "length", "speed"):
            out[k] = format_quantity(v, sub[0])
        else:
            out[k] = v
    return out


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_names() -> list:
    files = resources.files("ionmux").joinpath("presets")
    return sorted(p.name[:-5] for p in files.iterdir()
                  if p.name.endswith(".yaml"))


def _load_preset_raw(name: str, _seen=()) -> dict:
    if name in _seen:
        raise ConfigError(f"preset inheritance cycle at {name!r}")
    path = resources.files("ionmux").joinpath(f"presets/{name}.yaml")
    if not path.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    raw = yaml.safe_load(path.read_text()) or {}
    base = raw.pop("preset", None)
    if base is not None:
        raw = _deep_merge(_load_preset_raw(base, _seen + (name,)), raw)
    return raw


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: scenario spec plus run-level options."""

    resolved: dict
    seed: int = 0
    output_format: str = "csv"

    @property
    def scenario(self) -> Optional[dict]:
        return self.resolved.get("scenario")

    @property
    def sweep(self) -> Optional[dict]:
        return self.resolved.get("sweep")

    @property
    def bsm_efficiency(self) -> float:
        return self.resolved.get("bsm", {}).get("efficiency", 0.5)

    def canonical(self) -> dict:
        return _canonical_tree(_SCHEMA, self.resolved)

    def serialize(self) -> str:
        return yaml.safe_dump(self.canonical(), sort_keys=True)

    def protocol_spec(self) -> ProtocolSpec:
        sc = self.scenario
        if sc is None:
            raise ConfigError("configuration has no scenario block")
        return build_spec(sc)


def _set_path(tree: dict, path: str, raw: str) -> None:
    keys = path.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {path!r}: {k} is not a mapping")
    node[keys[-1]] = yaml.safe_load(raw)


def resolve_config(preset: Optional[str] = None,
                   config_path: Optional[str] = None,
                   overrides: Optional[list] = None,
                   seed: int = 0,
                   output_format: str = "csv") -> RunConfig:
    """Merge preset defaults, an optional config file, and --set overrides
    into a fully resolved, schema-checked run configuration."""
    raw: dict = {}
    if preset is not None:
        raw = _deep_merge(raw, _load_preset_raw(preset))
    if config_path is not None:
        p = Path(config_path)
        if not p.is_file():
            raise ConfigError(f"config file {config_path!r} does not exist")
        loaded = yaml.safe_load(p.read_text()) or {}
        base_preset = loaded.pop("preset", None)
        if base_preset is not None:
            raw = _deep_merge(raw, _load_preset_raw(base_preset))
        raw = _deep_merge(raw, loaded)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, value = item.split("=", 1)
        _set_path(raw, path.strip(), value)
    seed = raw.pop("seed", seed)
    output_format = raw.pop("format", output_format)
    resolved = _resolve_tree(_SCHEMA, raw)
    resolved["seed"] = _parse_leaf("seed", ("int", None), seed)
    resolved["format"] = _parse_leaf("format", _SCHEMA["format"], output_format)
    return RunConfig(resolved=resolved, seed=resolved["seed"],
                     output_format=resolved["format"])


def load_config(path: str) -> RunConfig:
    """Load and resolve a config file (with preset defaults applied)."""
    return resolve_config(config_path=path)


def build_spec(sc: dict) -> ProtocolSpec:
    """Construct a protocol spec from a resolved scenario mapping."""
    strat = sc.get("strategy", {})
    atomic = sc.get("atomic", {})
    params = AtomicParams(
        p_br_D=atomic.get("p_br_d", 0.06),
        w_up=atomic.get("w_up", 2.0 / 3.0),
        tau_P=atomic.get("tau_p", 7e-9),
    )
    strategy = Strategy(
        pulse_count=strat.get("pulses", 8),
        pump_after=frozenset(strat.get("pump_after", [])),
        window=strat.get("window", math.inf),
    )
    link = sc.get("link", {})
    eff = sc.get("efficiencies", {})
    length = link.get("length", 3.0)
    chain = EfficiencyChain(
        collection=eff.get("collection", 1.0),
        conversion=eff.get("conversion", 0.12),
        fiber_transmission=fiber_transmission(
            length, eff.get("attenuation_db_per_km", 0.0)),
        detector=eff.get("detector", 1.0),
        other=eff.get("other", 1.0),
    )
    mem = sc.get("memory", {})
    cooling = sc.get("cooling", {})
    return ProtocolSpec(
        ions=sc.get("ions", 1),
        per_ion_strategy=strategy,
        pulse_interval=sc.get("pulse_interval"),
        pump_duration=sc.get("pump_duration", 100e-9),
        init_pump_duration=sc.get("init_pump_duration", 100e-9),
        shuttle_time=sc.get("shuttle_time", 25e-6),
        return_shuttle=sc.get("return_shuttle", True),
        cooling_duration=cooling.get("duration", 0.0),
        cooling_every_rounds=cooling.get("every_rounds", 1),
        L=length,
        c_fiber=link.get("fiber_speed", 2.0e8),
        T_ovh=link.get("overhead", 1e-6),
        efficiencies=chain,
        memory=MemoryParams(
            a=mem.get("amplitude", 0.5),
            tau_coh=mem.get("tau_coh", 0.366),
            tau_life=mem.get("tau_life", 0.958),
        ),
        storage_time=mem.get("storage_time", 0.1),
        atomic=params,
        name=sc.get("name", "custom"),
    )
