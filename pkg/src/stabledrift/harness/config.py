"""Experiment configuration: TOML file + dotted overrides, validated by JSON schema."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import jsonschema

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "EXPERIMENTS",
    "DEFAULTS",
    "EXPERIMENT_DEFAULTS",
    "SCHEMA",
    "ConfigError",
    "ResourceError",
    "ExperimentConfig",
    "load_config",
    "parse_override",
    "validate",
    "from_json",
]

EXPERIMENTS = (
    "gate", "kernel-verify", "besov-verify", "product-bound", "schauder",
    "dynamics", "young", "identify-drift", "uniqueness", "krylov",
)

DEFAULTS = {
    "experiment": "gate",
    "out": "runs",
    "params": {"alpha": 1.5, "d": 1, "p": math.inf, "q": math.inf, "r": math.inf,
               "gamma": 0.9, "eps": 0.02, "T": 0.25},
    "grid": {"N": 1024, "L": math.pi},
    "sim": {"steps": 256, "paths": 10000, "seed": 0},
    "drift": {"levels": 8, "amplitude": 0.5, "margin": 0.05, "time_exponent": 0.0},
    "limits": {"memory_gb": 4.0},
}

# regimes the individual experiments are meant to probe; file and CLI values win
EXPERIMENT_DEFAULTS = {
    "schauder": {"params": {"T": 0.05}, "grid": {"N": 16384}, "sim": {"steps": 128},
                 "drift": {"levels": 12, "amplitude": 0.25}},
    "uniqueness": {"params": {"T": 0.1}, "sim": {"steps": 1024, "paths": 2000}},
    "identify-drift": {"drift": {"levels": 4}, "sim": {"steps": 256}},
}

_index = {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]}
_posint = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "params", "grid", "sim", "drift"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "out": {"type": "string"},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 1, "maximum": 2},
                "d": {"enum": [1, 2]},
                "p": _index, "q": _index, "r": _index,
                "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"N": {"type": "integer", "minimum": 64},
                           "L": {"type": "number", "exclusiveMinimum": 0}},
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"steps": _posint, "paths": _posint,
                           "seed": {"type": "integer", "minimum": 0}},
        },
        "drift": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"levels": {"type": "integer", "minimum": 4, "maximum": 40},
                           "amplitude": {"type": "number", "minimum": 0},
                           "margin": {"type": "number", "minimum": 0},
                           "time_exponent": {"type": "number", "minimum": 0}},
        },
        "limits": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"memory_gb": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


class ResourceError(ConfigError):
    """Requested budget exceeds the memory limit."""


def _jsonable(obj):
    """Replace infinities by the string 'inf' (JSON has no infinity)."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def _numeric(obj):
    if isinstance(obj, dict):
        return {k: _numeric(v) for k, v in obj.items()}
    if obj == "inf":
        return math.inf
    return obj


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(text: str) -> dict:
    """'params.gamma=0.8' -> {'params': {'gamma': 0.8}}; values use TOML syntax."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    out: dict = {}
    node = out
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``data`` holds the full nested mapping."""

    data: dict = field(repr=False)

    @property
    def experiment(self) -> str:
        return self.data["experiment"]

    @property
    def out(self) -> Path:
        return Path(self.data.get("out", "runs"))

    @property
    def seed(self) -> int:
        return int(self.data["sim"]["seed"])

    def section(self, name: str) -> dict:
        return dict(self.data[name])

    def to_json(self) -> dict:
        return _jsonable(self.data)

    def memory_estimate(self) -> float:
        """Rough peak memory in bytes of the largest arrays the experiment allocates."""
        g, s, p = self.data["grid"], self.data["sim"], self.data["params"]
        d = p["d"]
        field_bytes = (s["steps"] + 1) * g["N"] ** d * 8 * (2 + d) * 3
        path_bytes = (s["steps"] + 1) * s["paths"] * d * 8 * 4
        return float(max(field_bytes, path_bytes))

    def check_resources(self) -> None:
        limit = self.data.get("limits", {}).get("memory_gb", DEFAULTS["limits"]["memory_gb"])
        need = self.memory_estimate()
        if need > limit * 2 ** 30:
            raise ResourceError(
                f"estimated memory {need / 2 ** 30:.2f} GiB exceeds the {limit} GiB budget")


def validate(data: dict) -> dict:
    try:
        jsonschema.validate(_jsonable(data), SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    n = data["grid"]["N"]
    if n & (n - 1):
        raise ConfigError("grid.N must be a power of two")
    return data


def load_config(
    path=None,
    experiment: Optional[str] = None,
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
    out=None,
) -> ExperimentConfig:
    """Defaults <- per-experiment defaults <- TOML file <- --override pairs <- seed/out flags."""
    loaded = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                loaded = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
    name = experiment or loaded.get("experiment", DEFAULTS["experiment"])
    data = _merge(DEFAULTS, EXPERIMENT_DEFAULTS.get(name, {}))
    data = _merge(data, loaded)
    data["experiment"] = name
    for text in overrides:
        data = _merge(data, parse_override(text))
    if seed is not None:
        data["sim"]["seed"] = int(seed)
    if out is not None:
        data["out"] = str(out)
    data = _numeric(validate(data))
    return ExperimentConfig(data)


def from_json(data: dict) -> ExperimentConfig:
    """Rebuild a configuration from its manifest echo."""
    return ExperimentConfig(_numeric(validate(_numeric(data))))
