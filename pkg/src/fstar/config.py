"""Scenario configs: JSON schema, builtin lookup and typed accessors.

Validation errors carry a JSON pointer to the offending field so the CLI
can report it and exit with status 2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .cones import DirichletSet
from .formulas import FORMULAS
from .grid import Axis
from .harmonic import Domain

COMMANDS = (
    "check-product", "prekopa", "bm", "min-principle", "interp", "supconv", "example8",
    "legendre", "structural",
)

_AXIS = {
    "type": "array",
    "prefixItems": [{"type": "number"}, {"type": "number"}, {"type": "integer", "minimum": 2}],
    "items": False,
    "minItems": 3,
}
_AXES = {"type": "array", "items": _AXIS, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["id", "command"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "command": {"enum": list(COMMANDS)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "F": {
            "type": "object",
            "required": ["kind", "dim"],
            "properties": {
                "kind": {"enum": ["pos", "trace", "halfspaces", "eigen"]},
                "dim": {"type": "integer", "minimum": 1},
                "halfspaces": {"type": "array"},
                "functionals": {"type": "array"},
            },
        },
        "domain": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["interval", "disk"]}, "params": {"type": "object"}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"x": _AXES, "y": _AXES, "u": _AXES},
        },
        "data": {
            "type": "object",
            "required": ["formula"],
            "properties": {
                "formula": {"enum": sorted(FORMULAS)},
                "params": {"type": "object"},
                "path": {"type": "string"},
            },
        },
        "matrix": {
            "type": "object",
            "required": ["n", "m", "entries"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "entries": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "options": {"type": "object"},
    },
}

# per-formula parameter schemas, checked after the top-level schema
_NUM = {"type": "number"}
PARAM_SCHEMAS = {
    "quad8": {
        "type": "object",
        "additionalProperties": False,
        "properties": {k: _NUM for k in ("lam", "mu", "tau", "a", "b", "kappa")},
    },
    "gauss_shift": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "weight": _NUM,
            "shift": {"enum": ["sin", "linear"]},
            "slope": {"type": "array", "items": _NUM},
        },
    },
    "quadratic": {"type": "object", "required": ["matrix"], "properties": {"matrix": {"type": "object"}}},
    "random_quadratic": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"kind": {"enum": ["trace", "pos"]}, "count": {"type": "integer", "minimum": 1}},
    },
    "convex_1d": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"count": {"type": "integer", "minimum": 1}},
    },
    "indicator_family": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "bodies": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
            "ellipse": {
                "type": "object",
                "required": ["a", "b"],
                "additionalProperties": False,
                "properties": {
                    "a": {"type": "number", "exclusiveMinimum": 0},
                    "b": {"type": "number", "exclusiveMinimum": 0},
                    "turn": _NUM,
                    "center": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                    "wobble": _NUM,
                },
            },
            "n_dir": {"type": "integer", "minimum": 3},
        },
    },
    "cos_interval_family": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"amplitude": _NUM, "half_width": {"type": "number", "minimum": 0}},
    },
    "quad_family": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "curvature": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "linear": _NUM,
            "endpoints": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        },
    },
    "custom_csv": {"type": "object", "properties": {"split": {"type": "array", "items": {"type": "integer"}}}},
}


class ConfigError(ValueError):
    """Invalid scenario config; ``pointer`` locates the offending field."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
        self.message = message


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _first_error(schema, doc, prefix=()):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_pointer(list(prefix) + list(e.absolute_path)), e.message)


def validate(doc: dict) -> None:
    """Raise ConfigError for the first schema violation."""
    if not isinstance(doc, dict):
        raise ConfigError("/", "config must be a JSON object")
    _first_error(SCHEMA, doc)
    data = doc.get("data")
    if data:
        _first_error(PARAM_SCHEMAS[data["formula"]], data.get("params", {}), ("data", "params"))
        if data["formula"] == "custom_csv" and "path" not in data:
            raise ConfigError("/data/path", "custom_csv needs a path")
    for name in ("x", "y", "u"):
        for k, ax in enumerate(doc.get("grid", {}).get(name, [])):
            if not ax[1] > ax[0]:
                raise ConfigError(f"/grid/{name}/{k}", "axis needs hi > lo")
    if "F" in doc:
        try:
            DirichletSet.from_dict(doc["F"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("/F", str(exc)) from None
    if "domain" in doc:
        try:
            Domain.from_dict({"params": {}, **doc["domain"]})
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("/domain", str(exc)) from None


def builtin_names() -> list[str]:
    root = resources.files("fstar") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _builtin_text(name: str) -> str:
    return (resources.files("fstar") / "configs" / f"{name}.json").read_text()


@dataclass
class Scenario:
    """A validated scenario config with typed accessors."""

    doc: dict
    source: str = ""
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def id(self) -> str:
        return self.doc["id"]

    @property
    def command(self) -> str:
        return self.doc["command"]

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    def needs(self, *keys):
        for k in keys:
            if k not in self.doc:
                raise ConfigError(f"/{k}", f"'{k}' is required by {self.command}")

    def axes(self, name: str) -> tuple:
        if name not in self.doc.get("grid", {}):
            raise ConfigError(f"/grid/{name}", f"grid '{name}' is required by {self.command}")
        return tuple(Axis(float(lo), float(hi), int(c)) for lo, hi, c in self.doc["grid"][name])

    def F(self) -> DirichletSet:
        self.needs("F")
        return DirichletSet.from_dict(self.doc["F"])

    def domain(self) -> Domain:
        self.needs("domain")
        return Domain.from_dict({"params": {}, **self.doc["domain"]})

    @property
    def formula(self) -> str:
        self.needs("data")
        return self.doc["data"]["formula"]

    @property
    def params(self) -> dict:
        return dict(self.doc.get("data", {}).get("params", {}))

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def tol(self, name: str, default: float) -> float:
        return float(self.doc.get("tolerances", {}).get(name, default))

    def option(self, name: str, default=None):
        return self.doc.get("options", {}).get(name, default)


def load(spec: str, seed: int | None = None) -> Scenario:
    """Load a config from a path or a builtin name; ``seed`` overrides the config's."""
    p = Path(spec)
    if p.is_file():
        text, base = p.read_text(), p.resolve().parent
    elif spec in builtin_names():
        text, base = _builtin_text(spec), Path.cwd()
    else:
        raise ConfigError("/", f"no config file or builtin named {spec!r}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from None
    validate(doc)
    if seed is not None:
        doc["seed"] = int(seed)
    return Scenario(doc, spec, base)
