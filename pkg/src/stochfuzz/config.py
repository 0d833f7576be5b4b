"""JSON experiment configuration.

A configuration names each variable's universe and the channels realizing
its membership functions; the membership densities are derived from the
channels, so a loaded controller is consistent by construction.  See
``configs/*.json`` for complete examples.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .core import RuleBase, Universe
from .errors import ConfigError, StochFuzzError
from .hwsim import ControllerConfig, GeneratorConfig
from .rng import Lfsr, SingletonChannel, TriangularChannel

SCHEMA_VERSION = 1
CONFIG_ENV = "STOCHFUZZ_CONFIG"
DEFAULT_CONFIG = "eq7.json"

_TERM = {
    "type": "object",
    "properties": {"k": {"type": "integer", "minimum": 0}, "shift": {"type": "integer", "minimum": 0}},
    "required": ["k", "shift"],
    "additionalProperties": False,
}
_VARIABLE = {
    "type": "object",
    "properties": {
        "bits": {"type": "integer", "minimum": 2, "maximum": 16},
        "terms": {"type": "object", "minProperties": 1, "additionalProperties": _TERM},
    },
    "required": ["bits", "terms"],
    "additionalProperties": False,
}
SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "variables": {
            "type": "object",
            "properties": {"a": _VARIABLE, "b": _VARIABLE, "y": _VARIABLE},
            "required": ["a", "b", "y"],
            "additionalProperties": False,
        },
        "rules": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 3},
        },
        "generator": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["shared", "independent"]},
                "width": {"type": "integer", "minimum": 2, "maximum": 64},
                "taps": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "quantizer_bits": {"type": "integer"},
        "filter_alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "rule_schedule": {"enum": ["round_robin", "uniform_random"]},
        "input_mode": {"enum": ["crisp", "stochastic_fuzzy"]},
        "max_cycles": {"type": "integer", "minimum": 1},
        "experiment": {
            "type": "object",
            "properties": {
                "xa": {"type": "number", "minimum": 0, "maximum": 1},
                "xb": {"type": "number", "minimum": 0, "maximum": 1},
                "cycles": {"type": "integer", "minimum": 0},
                "grid_step": {"type": "integer", "minimum": 1},
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "replicas": {"type": "integer", "minimum": 2},
                "base_seed": {"type": "integer", "minimum": 1},
                "gof_trials": {"type": "integer", "minimum": 1},
                "gof_samples": {"type": "integer", "minimum": 1},
                "fuzzy_inputs": {
                    "type": "object",
                    "properties": {"a": _TERM, "b": _TERM},
                    "required": ["a", "b"],
                    "additionalProperties": False,
                },
                "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema_version", "variables", "rules"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ExperimentParams:
    xa: float = 0.5
    xb: float = 0.5
    cycles: int = 1_000_000
    grid_step: int = 4
    checkpoints: tuple[int, ...] = (1000, 2000, 4000, 8000, 16000)
    replicas: int = 30
    base_seed: int = 1
    gof_trials: int = 100
    gof_samples: int = 100_000
    fuzzy_inputs: dict | None = None
    outputs: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    controller: ControllerConfig
    experiment: ExperimentParams
    name: str = ""
    source: str = ""

    def fuzzy_input_channels(self):
        fi = self.experiment.fuzzy_inputs
        if fi is None:
            return None
        return tuple(_channel(fi[v], f"{v}_in") for v in ("a", "b"))


def _channel(term: dict, label: str):
    if term["k"] == 0:
        return SingletonChannel(term["shift"], label)
    return TriangularChannel(term["k"], term["shift"], label)


def build_config(data: dict) -> ExperimentConfig:
    """Validate a parsed JSON document and build the experiment from it."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(path, exc.message) from None

    channels: dict[str, dict] = {}
    terms: dict[str, dict] = {}
    for var, spec in data["variables"].items():
        universe = Universe(spec["bits"])
        channels[var], terms[var] = {}, {}
        for name, term in spec["terms"].items():
            path = f"variables.{var}.terms.{name}"
            ch = _channel(term, name)
            try:
                terms[var][name] = ch.pdf(universe)
            except StochFuzzError as exc:
                raise ConfigError(path, f"channel {name!r}: {exc}") from None
            channels[var][name] = ch

    for i, rule in enumerate(data["rules"]):
        for var, name in zip(("a", "b", "y"), rule):
            if name not in terms[var]:
                raise ConfigError(f"rules.{i}", f"unknown {var} membership {name!r}")
    rulebase = RuleBase(terms["a"], terms["b"], terms["y"], tuple(tuple(r) for r in data["rules"]))

    gen = dict(data.get("generator", {}))
    if gen.get("seed", 1) == 0:
        raise ConfigError(
            "generator.seed", "seed must be nonzero; the starting logic forbids the all-zero state"
        )
    if "taps" in gen:
        gen["taps"] = tuple(gen["taps"])
    generator = GeneratorConfig(**gen)
    try:
        Lfsr(generator.width, generator.taps, generator.seed)
    except StochFuzzError as exc:
        raise ConfigError("generator", str(exc)) from None

    options = {
        key: data[key]
        for key in ("quantizer_bits", "filter_alpha", "rule_schedule", "input_mode", "max_cycles")
        if key in data
    }
    try:
        controller = ControllerConfig(rulebase, channels, generator, **options)
    except ValueError as exc:
        raise ConfigError("<root>", str(exc)) from None

    exp = dict(data.get("experiment", {}))
    if "checkpoints" in exp:
        cps = exp["checkpoints"]
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError("experiment.checkpoints", "checkpoints must be strictly increasing")
        exp["checkpoints"] = tuple(cps)
    params = ExperimentParams(**exp)
    config = ExperimentConfig(controller, params, data.get("name", ""))
    if params.fuzzy_inputs is not None:
        for var, ch in zip(("a", "b"), config.fuzzy_input_channels()):
            try:
                ch.check_universe(rulebase.universe(var))
            except StochFuzzError as exc:
                raise ConfigError(f"experiment.fuzzy_inputs.{var}", str(exc)) from None
    if controller.input_mode == "stochastic_fuzzy" and params.fuzzy_inputs is None:
        raise ConfigError("experiment.fuzzy_inputs", "required when input_mode is stochastic_fuzzy")
    return config


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("stochfuzz.configs").iterdir()
                  if p.name.endswith(".json"))


def resolve_config_path(path: str | os.PathLike | None = None) -> Path | Any:
    """Locate a config: explicit path, then ``$STOCHFUZZ_CONFIG``, then the bundled default.

    A bare name such as ``eq7.json`` that is not an existing file resolves to
    the bundled copy.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV, DEFAULT_CONFIG)
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("stochfuzz.configs").joinpath(p.name)
    if p.name == str(path) and bundled.is_file():
        return bundled
    raise FileNotFoundError(f"config {str(path)!r} not found")


def load_config(path: str | os.PathLike | None = None) -> ExperimentConfig:
    resolved = resolve_config_path(path)
    text = resolved.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<parse>:{exc.lineno}:{exc.colno}", exc.msg) from None
    config = build_config(data)
    return ExperimentConfig(config.controller, config.experiment, config.name, str(resolved))
