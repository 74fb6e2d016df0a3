"""Run configuration: JSON schema, defaults and parsing."""

import copy
import json
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigError
from .operator import BUILTINS
from .threshold import DEFAULT_LADDER

_NAME = "(" + "|".join(sorted(BUILTINS)) + ")"

_POS = {"type": "number", "exclusiveMinimum": 0}

GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["r_max", "z_max", "n_r", "n_z"],
    "properties": {
        "r_max": _POS,
        "z_max": _POS,
        "n_r": {"type": "integer", "minimum": 8},
        "n_z": {"type": "integer", "minimum": 8},
    },
}

POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["constant", "analytic-periodic", "tabulated", "sum"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": "constant"}}},
         "then": {"additionalProperties": False, "required": ["value"],
                  "properties": {"kind": True, "value": {"type": "number"}}}},
        {"if": {"properties": {"kind": {"const": "analytic-periodic"}}},
         "then": {"additionalProperties": False, "required": ["expr", "amplitude"],
                  "properties": {
                      "kind": True,
                      "expr": {"type": "string", "pattern": f"^{_NAME}(\\+{_NAME})*$"},
                      "amplitude": {"oneOf": [{"type": "number"},
                                              {"type": "array", "items": {"type": "number"}, "minItems": 1}]}}}},
        {"if": {"properties": {"kind": {"const": "tabulated"}}},
         "then": {"additionalProperties": False, "required": ["r", "z", "values"],
                  "properties": {
                      "kind": True,
                      "r": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                      "z": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                      "values": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}}}},
        {"if": {"properties": {"kind": {"const": "sum"}}},
         "then": {"additionalProperties": False, "required": ["terms"],
                  "properties": {"kind": True,
                                 "terms": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/potential"}}}}},
    ],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"grid": GRID_SCHEMA, "potential": POTENTIAL_SCHEMA},
    "type": "object",
    "additionalProperties": False,
    "required": ["grid", "potential", "p"],
    "properties": {
        "grid": {"$ref": "#/$defs/grid"},
        "potential": {"$ref": "#/$defs/potential"},
        "p": {"type": "number", "exclusiveMinimum": 2, "exclusiveMaximum": 6},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"sobolev": _POS, "fiber": _POS, "outer": _POS,
                           "zero": {"type": ["number", "null"], "exclusiveMinimum": 0}},
        },
        "sobolev": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"grid": {"$ref": "#/$defs/grid"}, "pin_radius": _POS,
                           "max_iter": {"type": "integer", "minimum": 1},
                           "n_random": {"type": "integer", "minimum": 0}},
        },
        "threshold_grid": {"anyOf": [{"type": "null"}, {"$ref": "#/$defs/grid"}]},
        "eps_ladder": {"type": "array", "minItems": 5,
                       "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
        "starts": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
}

# Documented defaults; also printed by `curlground --help`.
DEFAULTS = {
    "tolerances": {"sobolev": 1e-7, "fiber": 1e-10, "outer": 1e-6, "zero": None},
    "sobolev": {"grid": {"r_max": 6.0, "z_max": 6.0, "n_r": 192, "n_z": 385},
                "pin_radius": 1.0, "max_iter": 400, "n_random": 0},
    "threshold_grid": None,
    "eps_ladder": list(DEFAULT_LADDER),
    "starts": 1,
    "output_dir": "curlground-out",
    "seed": 0,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass
class RunConfig:
    grid: dict
    potential: dict
    p: float
    tolerances: dict = field(default_factory=lambda: dict(DEFAULTS["tolerances"]))
    sobolev: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["sobolev"]))
    threshold_grid: dict = None
    eps_ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    starts: int = 1
    output_dir: str = "curlground-out"
    seed: int = 0

    def to_dict(self):
        return {
            "grid": dict(self.grid),
            "potential": copy.deepcopy(self.potential),
            "p": self.p,
            "tolerances": dict(self.tolerances),
            "sobolev": copy.deepcopy(self.sobolev),
            "threshold_grid": None if self.threshold_grid is None else dict(self.threshold_grid),
            "eps_ladder": list(self.eps_ladder),
            "starts": self.starts,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


def _pointer(error):
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1] if "'" in error.message else ""
        parts.append(missing)
    elif error.validator == "additionalProperties" and "'" in error.message:
        parts.append(error.message.split("'")[1])
    return "/" + "/".join(parts) if parts else ""


def validate(data):
    """Raise ``ConfigError`` (with a JSON pointer) unless ``data`` matches the schema."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, pointer=_pointer(err))


def from_dict(data):
    """Validate and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    validate(data)
    d = copy.deepcopy(data)
    tol = dict(DEFAULTS["tolerances"])
    tol.update(d.get("tolerances", {}))
    sob = copy.deepcopy(DEFAULTS["sobolev"])
    sob.update(d.get("sobolev", {}))
    ladder = [float(e) for e in d.get("eps_ladder", DEFAULTS["eps_ladder"])]
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("eps ladder must be strictly descending", pointer="/eps_ladder")
    return RunConfig(
        grid=d["grid"], potential=d["potential"], p=float(d["p"]), tolerances=tol, sobolev=sob,
        threshold_grid=d.get("threshold_grid"), eps_ladder=ladder,
        starts=int(d.get("starts", DEFAULTS["starts"])),
        output_dir=d.get("output_dir", DEFAULTS["output_dir"]),
        seed=int(d.get("seed", DEFAULTS["seed"])),
    )


def parse_config(path):
    """Read a JSON config file into a ``RunConfig``."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return from_dict(data)
