"""Run configuration: a single JSON document, schema-checked before any
computation touches it.

The document is validated against a closed schema (unknown keys are
rejected everywhere), defaults are merged in, and the merged result is
kept as ``echo`` so a persisted run records exactly what it ran with.
Parsing the echo again yields an identical configuration.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import jsonschema

from .certify import RegionSpec
from .continuity import Schedule
from .errors import ParameterError
from .grid import Grid
from .metrics import MetricField, MetricSpec, TrigExpr, build_metric

SCHEMA_VERSION = 1

_TRIG = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "constant": {"type": "number"},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["c", "modes"],
                "properties": {
                    "c": {"type": "number"},
                    "modes": {"type": "array", "items": {"type": "integer"}},
                    "kind": {"enum": ["cos", "sin"]},
                },
            },
        },
    },
}

_METRIC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["flat", "kahler_potential", "conformal", "direct"]},
        "potential": _TRIG,
        "log_conformal": _TRIG,
        "components": {
            "type": "object",
            "patternProperties": {
                r"^\d+,\d+$": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"re": _TRIG, "im": _TRIG},
                },
            },
            "additionalProperties": False,
        },
    },
}

_REGION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "center": {"type": "array", "items": {"type": "number"}},
        "radii": {
            "anyOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            ],
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "N", "omega0"],
            "properties": {
                "n": {"type": "integer", "minimum": 1, "maximum": 3},
                "N": {"type": "integer", "minimum": 8},
                "omega0": _METRIC,
                "eta": _METRIC,
                "psi": _TRIG,
                "region": _REGION,
            },
        },
        "functional": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["rbc", "ric_perp", "k_ricci"]},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"type": "number"},
                "k": {"type": "integer", "minimum": 1, "maximum": 3},
                "restarts": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "hypotheses": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "number", "minimum": 0},
                "delta": {"type": "number", "minimum": 0},
                "delta1": {"type": "number", "exclusiveMinimum": 0},
                "delta2": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "mode": {"enum": ["thm1", "thm2"]},
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_start": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "min_step_factor": {
                    "type": "number", "exclusiveMinimum": 0, "maximum": 1,
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "positivity_floor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "audit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ineq_tol": {"type": "number", "exclusiveMinimum": 0},
                "identity_tol": {"type": "number", "exclusiveMinimum": 0},
                "c0": {"type": "number", "exclusiveMinimum": 0},
                "family_size": {"type": "integer", "minimum": 1},
                "t_limit": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "functional": {
        "kind": "rbc", "alpha": 1.0, "beta": 1.0, "k": 1,
        "restarts": 24, "max_iter": 80,
    },
    "hypotheses": {"eps": 0.1, "delta": 0.1, "delta1": 1.0, "delta2": 1.0},
    "mode": "thm1",
    "schedule": {
        "t_start": 1.0, "t_end": 0.1, "steps": 9, "min_step_factor": 0.0625,
    },
    "solver": {"tol": 1e-10, "max_iter": 50, "positivity_floor": 1e-6},
    "audit": {"ineq_tol": 1e-5, "identity_tol": 1e-8, "c0": 1.0,
              "family_size": 12},
    "seed": 0,
}

_GEOMETRY_DEFAULTS = {"region": {"radii": 0.25}}


def _merge_defaults(base: dict, data: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_defaults(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _path_of(err: jsonschema.ValidationError) -> str:
    parts = ["$"]
    for step in err.absolute_path:
        parts.append(f"[{step}]" if isinstance(step, int) else f".{step}")
    return "".join(parts)


@dataclass
class RunConfig:
    """Validated configuration plus its fully defaulted echo document."""

    echo: dict = field(repr=False)

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ParameterError(
                f"configuration must be a JSON object, got {type(data).__name__}")
        merged = _merge_defaults(DEFAULTS, data)
        geometry = merged.get("geometry")
        if isinstance(geometry, dict):
            merged["geometry"] = _merge_defaults(_GEOMETRY_DEFAULTS, geometry)
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(merged), key=lambda e: list(e.absolute_path))
        if errors:
            lines = [f"  at {_path_of(e)}: {e.message}" for e in errors[:8]]
            if len(errors) > 8:
                lines.append(f"  ... and {len(errors) - 8} more")
            raise ParameterError("configuration invalid:\n" + "\n".join(lines))
        cfg = RunConfig(echo=merged)
        # eager construction surfaces domain errors (bad mode vectors, region
        # geometry, non power-of-two N) with the same exception type
        cfg.grid()
        cfg.omega0_spec()
        cfg.eta_spec()
        cfg.psi_expr()
        cfg.region()
        if merged["mode"] == "thm2" and merged["functional"]["beta"] <= 0:
            raise ParameterError("thm2 requires functional.beta > 0")
        cfg.schedule()  # enforces t_start > t_end > 0
        return cfg

    @staticmethod
    def from_file(path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ParameterError(
                    f"configuration is not valid JSON: line {err.lineno} "
                    f"column {err.colno}: {err.msg}") from err
        return RunConfig.from_dict(data)

    # -- typed accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.echo["geometry"]["n"]

    @property
    def N(self) -> int:
        return self.echo["geometry"]["N"]

    @property
    def mode(self) -> str:
        return self.echo["mode"]

    @property
    def seed(self) -> int:
        return self.echo["seed"]

    def grid(self) -> Grid:
        return Grid(self.n, self.N)

    def omega0_spec(self) -> MetricSpec:
        return MetricSpec.from_dict(self.echo["geometry"]["omega0"], self.n)

    def eta_spec(self) -> MetricSpec | None:
        raw = self.echo["geometry"].get("eta")
        return None if raw is None else MetricSpec.from_dict(raw, self.n)

    def psi_expr(self) -> TrigExpr | None:
        raw = self.echo["geometry"].get("psi")
        return None if raw is None else TrigExpr.from_dict(raw, 2 * self.n)

    def region(self) -> RegionSpec:
        return RegionSpec.from_dict(self.echo["geometry"]["region"], self.n)

    def build_omega0(self) -> MetricField:
        return build_metric(self.grid(), self.omega0_spec())

    def build_eta(self) -> MetricField | None:
        spec = self.eta_spec()
        return None if spec is None else build_metric(self.grid(), spec)

    def schedule(self) -> Schedule:
        s = self.echo["schedule"]
        return Schedule(t_start=s["t_start"], t_end=s["t_end"], steps=s["steps"],
                        min_step_factor=s["min_step_factor"])

    @property
    def functional(self) -> dict:
        return self.echo["functional"]

    @property
    def hypotheses(self) -> dict:
        return self.echo["hypotheses"]

    @property
    def solver(self) -> dict:
        return self.echo["solver"]

    @property
    def audit(self) -> dict:
        return self.echo["audit"]

    def to_json(self) -> str:
        return json.dumps(self.echo, indent=2, sort_keys=True) + "\n"


__all__ = ["RunConfig", "SCHEMA", "SCHEMA_VERSION", "DEFAULTS"]
