"""Run configuration: JSON schema, validation with line numbers, model assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from . import models
from .decomposition import KINDS, DecompositionSpec
from .errors import ConfigError, RealBranchError
from .linalg import BipartiteSpace, StateVector
from .tolerances import DEFAULT, Tolerances

SCHEMA_VERSION = 1

_number = {"type": "number"}
_complex = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_times = {"type": "array", "items": {"type": "number", "minimum": 0}}


def _model(name: str, params: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": {
            "name": {"const": name},
            "params": {
                "type": "object",
                "properties": params,
                "required": list(required),
                "additionalProperties": False,
            },
        },
        "required": ["name"],
        "additionalProperties": False,
    }


MODEL_SCHEMAS = {
    "measurement_chain": _model("measurement_chain", {
        "alpha": _complex, "beta": _complex,
        "n_env": {"type": "integer", "minimum": 1, "maximum": 11},
        "g": {"type": "number", "exclusiveMinimum": 0},
        "t_rec": _times, "post_field": _number,
    }, required=["alpha"]),
    "recoherence": _model("recoherence", {
        "alpha": _complex, "beta": _complex,
        "t_rec": {"type": "number", "minimum": 0}, "t_unrec": {"type": "number", "minimum": 0},
        "g": {"type": "number", "exclusiveMinimum": 0},
    }, required=["alpha"]),
    "sequential_measurements": _model("sequential_measurements", {
        "alpha": _complex, "beta": _complex, "theta": _number,
        "g": {"type": "number", "exclusiveMinimum": 0},
        "t_rec": {**_times, "minItems": 2, "maxItems": 2},
        "rotation_time": {"type": "number", "exclusiveMinimum": 0},
    }, required=["alpha", "theta"]),
    "random": _model("random", {
        "seed": {"type": "integer", "minimum": 0},
        "d_A": {"type": "integer", "minimum": 1}, "d_B": {"type": "integer", "minimum": 1},
        "energy_scale": _number,
    }, required=["seed", "d_A", "d_B"]),
    "static": _model("static", {
        "d_A": {"type": "integer", "minimum": 1}, "d_B": {"type": "integer", "minimum": 1},
        "a": {"type": "integer", "minimum": 0}, "b": {"type": "integer", "minimum": 0},
    }, required=["d_A", "d_B"]),
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "realbranch run configuration",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": {
            "type": "object",
            "properties": {"name": {"enum": sorted(MODEL_SCHEMAS)}},
            "required": ["name"],
        },
        "decomposition": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(KINDS)},
                "eps_deg": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "horizons": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "times": _times,
        "seed": {"type": ["integer", "null"], "minimum": 0, "maximum": 2 ** 64 - 1},
        "output_dir": {"type": "string"},
        "tolerances": {
            "type": "object",
            "properties": {
                name: ({"type": "integer", "minimum": 1} if name == "n_stable"
                       else {"type": "number", "exclusiveMinimum": 0})
                for name in DEFAULT.as_dict()
            },
            "additionalProperties": False,
        },
    },
    "required": ["model", "horizons"],
    "additionalProperties": False,
}


def line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON key at ``path`` (keys searched in order)."""
    pos, found = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            break
        pos, found = hit, hit
    if found is None:
        return 1 if text.strip() else None
    return text.count("\n", 0, found) + 1


@dataclass
class RunConfig:
    model: dict
    horizons: list[float]
    times: list[float]
    decomposition: dict | None = None
    seed: int | None = None
    output_dir: str | None = None
    tolerances: Tolerances = DEFAULT
    raw: dict = field(default_factory=dict, repr=False)

    def build_model(self) -> models.ModelSpec:
        return build_model(self.model)

    def decomp_spec(self, model: models.ModelSpec) -> DecompositionSpec:
        if not self.decomposition:
            return model.decomp
        kind = self.decomposition["kind"]
        eps_deg = self.decomposition.get("eps_deg")
        if kind == "basis" and model.decomp.kind == "basis":
            return model.decomp
        return DecompositionSpec(kind, eps_deg=eps_deg)


def _as_complex(value) -> complex:
    if isinstance(value, list):
        return complex(value[0], value[1])
    return complex(value)


def _amplitudes(params: dict) -> tuple[complex, complex]:
    alpha = _as_complex(params["alpha"])
    if "beta" in params:
        return alpha, _as_complex(params["beta"])
    rest = 1.0 - abs(alpha) ** 2
    if rest < -1e-12:
        raise ConfigError(f"|alpha|^2 = {abs(alpha) ** 2} exceeds 1")
    return alpha, complex(np.sqrt(max(rest, 0.0)))


def build_model(model: dict) -> models.ModelSpec:
    name, p = model["name"], model.get("params", {})
    if name == "measurement_chain":
        return models.measurement_chain(*_amplitudes(p), p.get("n_env", 1), p.get("g", 1.0),
                                        p.get("t_rec"), p.get("post_field", 0.0))
    if name == "recoherence":
        return models.recoherence_model(*_amplitudes(p), p.get("t_rec", 0.5),
                                        p.get("t_unrec", 3.0), p.get("g", 1.0))
    if name == "sequential_measurements":
        return models.sequential_measurements(*_amplitudes(p), p["theta"], p.get("g", 1.0),
                                              p.get("t_rec"), p.get("rotation_time", 1.0))
    if name == "random":
        return models.random_model(p["seed"], p["d_A"], p["d_B"], p.get("energy_scale", 1.0))
    if name == "static":
        space = BipartiteSpace(p["d_A"], p["d_B"])
        a, b = p.get("a", 0), p.get("b", 0)
        if a >= space.d_A or b >= space.d_B:
            raise ConfigError(f"basis index ({a}, {b}) outside {space.d_A}x{space.d_B}")
        return models.static_model(StateVector.basis(space, a, b))
    raise ConfigError(f"unknown model {name!r}; allowed: {sorted(MODEL_SCHEMAS)}")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration document, without computing anything."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None

    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(x) for x in e.absolute_path])
    if not errors and isinstance(data.get("model"), dict):
        name = data["model"]["name"]
        sub = jsonschema.Draft202012Validator(MODEL_SCHEMAS[name])
        errors = [e for e in sub.iter_errors(data["model"])]
        for e in errors:
            e.absolute_path.appendleft("model")
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        where = ".".join(str(x) for x in path) or "<root>"
        message = err.message
        if err.validator == "additionalProperties":
            message = f"unknown key(s): {message}"
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            path = path + extra[:1]
        raise ConfigError(f"{where}: {message}", line_of(text, path))

    horizons = [float(x) for x in data["horizons"]]
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ConfigError("horizons: values must be strictly increasing", line_of(text, ["horizons"]))
    if "times" in data:
        times = [float(x) for x in data["times"]]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("times: values must be strictly increasing", line_of(text, ["times"]))
        if times and times[-1] > horizons[0]:
            raise ConfigError(f"times: values must not exceed the smallest horizon {horizons[0]}",
                              line_of(text, ["times"]))
    else:
        times = [float(x) for x in np.linspace(0.0, horizons[0], 11)]

    try:
        tol = DEFAULT.with_overrides(**data.get("tolerances", {}))
    except KeyError as exc:
        raise ConfigError(f"tolerances: {exc.args[0]}", line_of(text, ["tolerances"])) from None

    cfg = RunConfig(data["model"], horizons, times, data.get("decomposition"),
                    data.get("seed"), data.get("output_dir"), tol, data)
    # model parameters are only fully checked by building the model
    try:
        model = cfg.build_model()
    except (RealBranchError, ValueError) as exc:
        raise ConfigError(f"model: {exc}", line_of(text, ["model"])) from None
    if model.sched.horizon < horizons[-1]:
        raise ConfigError("horizons: exceed the model schedule", line_of(text, ["horizons"]))
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_echo(cfg: RunConfig) -> dict[str, Any]:
    out = dict(cfg.raw)
    out["tolerances"] = cfg.tolerances.as_dict()
    out["times"] = cfg.times
    return out
