"""JSON problem configuration: schema validation and problem construction."""

from __future__ import annotations

import json
from dataclasses import dataclass

import jsonschema

from .catalog import initial_from_spec, source_from_spec
from .collocation import FAMILIES, parse_points
from .errors import ConfigError, DomainError
from .semilinear import DEFAULT_MAX_ITER, DEFAULT_TOL, SemilinearProblem, SemilinearSource
from .spatial import EllipticCoefficients, SpatialGrid, coefficient
from .stepper import SubdiffusionProblem, TemporalMesh

__all__ = ["SCHEMA", "ProblemConfig", "load_config", "parse_config"]

_number = {"type": "number"}

_COEFF = {
    "oneOf": [
        _number,
        {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "linear", "sine", "polynomial"]},
                "value": _number,
                "intercept": _number,
                "slope": _number,
                "offset": _number,
                "amplitude": _number,
                "frequency": _number,
                "coefficients": {"type": "array", "items": _number, "minItems": 1},
            },
            "additionalProperties": False,
        },
    ]
}

_TIME = {"type": "array", "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}}

_EXACT = {
    "type": "object",
    "properties": {
        "type": {"const": "separable"},
        "wavenumber": {"type": "integer", "minimum": 1},
        "time": _TIME,
    },
    "required": ["time"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["alpha", "m", "mesh", "space"],
    "additionalProperties": False,
    "properties": {
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "m": {"type": "integer", "minimum": 1, "maximum": 20},
        "points": {
            "oneOf": [
                {"enum": list(FAMILIES)},
                {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1},
            ]
        },
        "mesh": {
            "type": "object",
            "required": ["M"],
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "number", "minimum": 1},
            },
        },
        "space": {
            "type": "object",
            "required": ["N"],
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "xl": _number,
                "xr": _number,
                "a": _COEFF,
                "b": _COEFF,
                "c": _COEFF,
            },
        },
        "source": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["zero", "constant", "separable", "manufactured"]},
                "value": _number,
                "wavenumber": {"type": "integer", "minimum": 1},
                "time": _TIME,
                "exact": _EXACT,
                "operator": {"enum": ["discrete", "continuous"]},
            },
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["zero", "sine", "exact"]},
                "amplitude": _number,
                "wavenumber": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "semilinear": {
            "type": "object",
            "required": ["type", "mu"],
            "properties": {
                "type": {"const": "sine"},
                "amplitude": _number,
                "mu": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "iteration": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
}


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    raw: dict
    problem: object
    semilinear: bool
    tol: float
    max_iter: int


def parse_config(doc: dict) -> ProblemConfig:
    """Validate ``doc`` and build the corresponding problem."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    try:
        rule = parse_points(doc.get("points", "chebyshev"), doc["m"])
        mesh = TemporalMesh(doc["mesh"]["M"], doc["mesh"].get("T", 1.0), doc["mesh"].get("r", 1.0))
        sp = doc["space"]
        grid = SpatialGrid(sp["N"], sp.get("xl", 0.0), sp.get("xr", 1.0))
        coeff = EllipticCoefficients(
            coefficient(sp.get("a", 1.0)), coefficient(sp.get("b", 0.0)), coefficient(sp.get("c", 0.0))
        )
        coeff.validate(grid)
        source = source_from_spec(doc.get("source", {"type": "zero"}))
        initial = initial_from_spec(doc.get("initial", {"type": "zero"}), source.exact)
        tol_doc = doc.get("tolerances", {})
        tol = float(tol_doc.get("iteration", DEFAULT_TOL))
        max_iter = int(tol_doc.get("max_iter", DEFAULT_MAX_ITER))
        if "semilinear" in doc:
            sl = doc["semilinear"]
            src = SemilinearSource(sl.get("amplitude", 0.0), source, sl["mu"])
            problem = SemilinearProblem(doc["alpha"], rule, mesh, grid, coeff, src, initial)
        else:
            problem = SubdiffusionProblem(doc["alpha"], rule, mesh, grid, coeff, source, initial)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if rule.m != doc["m"]:
        raise ConfigError(f"points array has {rule.m} entries but m = {doc['m']}")
    return ProblemConfig(doc, problem, "semilinear" in doc, tol, max_iter)


def load_config(path) -> ProblemConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)

