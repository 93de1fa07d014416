"""JSON schemas for system and run configurations."""
from __future__ import annotations

import jsonschema

from .errors import ConfigError

SCHEMA_VERSION = 1

_TERM = {
    "type": "object",
    "properties": {
        "shape": {"enum": ["power", "coulomb", "oscillator_xy"]},
        "coupling": {"type": "number"},
        "degree": {"type": "number"},
    },
    "required": ["shape", "coupling"],
    "additionalProperties": False,
    "if": {"properties": {"shape": {"const": "power"}}},
    "then": {"required": ["degree"]},
}

_DOMAIN = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["unbounded", "box"]},
        "lower": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "upper": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "bc": {"enum": ["dirichlet", "neumann"]},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "mass": {"type": "number", "exclusiveMinimum": 0},
        "hbar": {"type": "number", "exclusiveMinimum": 0},
        "dimension": {"type": "integer", "minimum": 1},
        "terms": {"type": "array", "items": _TERM},
        "domain": _DOMAIN,
    },
    "additionalProperties": False,
}

_MAP = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["omega", "homogeneous", "gamma_field", "raw_energy"]},
        "nu": {"type": "number"},
        "E0": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SPECTRUM = {
    "type": "object",
    "properties": {
        "solver": {"enum": ["analytic", "fd"]},
        "kind": {"enum": ["box", "oscillator", "coulomb"]},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "count": {"type": "integer", "minimum": 1},
        "first": {"type": "integer", "minimum": 1},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "grid_n": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

_ORBIT = {
    "energy": {"type": "number"},
    "x_center": {"type": "number"},
    "n_nodes": {"type": "integer", "minimum": 4},
    "n_steps": {"type": "integer", "minimum": 10},
}

_TASK_PARAMS = {
    "orbit": {
        **_ORBIT,
        "action": {"enum": ["find", "invariants"]},
    },
    "scale": {
        **_ORBIT,
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "kind": {"enum": ["coupling", "homogeneous", "mixed"]},
        "anchor_index": {"type": "integer", "minimum": 0},
    },
    "spectrum": _SPECTRUM["properties"],
    "oscillate": {
        "spectrum": _SPECTRUM,
        "map": _MAP,
        "levels": {"type": "integer", "minimum": 1},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "detrend_degree": {"type": "integer", "minimum": 0},
        "grid_n": {"type": "integer", "minimum": 16},
        "window": {"enum": ["hann", "rect"]},
        "catalog": {
            "type": "object",
            "properties": {
                "a": {"type": "number"},
                "b": {"type": "number"},
                "n_max": {"type": "integer", "minimum": 1},
            },
            "required": ["a"],
            "additionalProperties": False,
        },
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
    "loci": {
        "kind": {"enum": ["oscillator", "coulomb"]},
        "n_max": {"type": "integer", "minimum": 1},
        "couplings": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
    },
    "check": {
        **_ORBIT,
        "check": {"enum": ["virial", "dsde", "scaling"]},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
}


def run_schema() -> dict:
    return {
        "type": "object",
        "properties": {
            "schema": {"const": SCHEMA_VERSION},
            "system": SYSTEM_SCHEMA,
            "task": {"enum": sorted(_TASK_PARAMS)},
            "params": {"type": "object"},
            "output_dir": {"type": "string", "minLength": 1},
        },
        "required": ["schema", "task", "output_dir"],
        "additionalProperties": False,
    }


def params_schema(task: str) -> dict:
    return {"type": "object", "properties": _TASK_PARAMS[task], "additionalProperties": False}


def _validate(data, schema, what):
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what} at {loc}: {exc.message}") from None


def validate_system(data: dict) -> None:
    _validate(data, SYSTEM_SCHEMA, "system")


def validate_run(data: dict) -> None:
    _validate(data, run_schema(), "run config")
    _validate(data.get("params", {}), params_schema(data["task"]), f"{data['task']} params")
