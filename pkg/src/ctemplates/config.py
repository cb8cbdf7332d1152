"""JSON scenario files: schema, parsing with cross-field validation, serialisation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ValidationError
from .hybridloop import FeedbackLaw, LoopState, initial_state
from .polyalg import MultiPoly, PolyMatrix
from .sysmodel import StateAffineSystem, check_observable_at_target
from .templates import (TemplateFamily, explicit_family, genpos_family, siso_family,
                        square_family)

EXAMPLE_NAME = "example_three_state.json"

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_term = {
    "type": "array",
    "prefixItems": [_number, {"type": "array", "items": {"type": "integer", "minimum": 0}}],
    "minItems": 2,
    "maxItems": 2,
}
_poly = {"type": "array", "items": _term}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "feedback", "theta", "delta", "T_final", "template", "initial"],
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "m", "p", "A", "C", "b"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "p": {"type": "integer", "minimum": 1},
                "A": {"type": "array", "items": {"type": "array", "items": _poly}},
                "C": {"type": "array", "items": {"type": "array", "items": _poly}},
                "b": {"type": "array", "items": _poly},
            },
        },
        "feedback": {
            "type": "object",
            "additionalProperties": False,
            "required": ["K"],
            "properties": {
                "K": _matrix,
                "saturation_radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "T_final": {"type": "number", "exclusiveMinimum": 0},
        "substeps": {"type": "integer", "minimum": 1},
        "template": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["siso", "genpos", "square", "explicit"]},
                "N": {"type": "integer", "minimum": 1},
                "d": {"type": ["integer", "null"], "minimum": 0},
                "anchors": {"type": ["array", "null"], "items": _number},
                "points": _matrix,
                "T": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x0", "xhat0"],
            "properties": {
                "x0": _vector,
                "xhat0": _vector,
                "S0": {"oneOf": [{"const": "identity"}, _matrix]},
                "s0": {"type": "number", "minimum": 0},
                "mu0": {"type": ["number", "null"], "minimum": 0},
                "R0": {"oneOf": [{"type": "null"}, _matrix]},
            },
        },
        "certify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda_bar": {"type": ["number", "null"], "minimum": 0},
                "mu_grid": {"type": "integer", "minimum": 1},
                "rot_grid": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {"type": "string"},
    },
}

DEFAULTS = {
    "substeps": 20,
    "output": "trajectory.csv",
    "certify": {"lambda_bar": None, "mu_grid": 50, "rot_grid": 64, "seed": 0},
    "feedback": {"saturation_radius": None},
    "initial": {"S0": "identity", "s0": 0.0, "mu0": None, "R0": None},
}


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``raw`` is the canonical JSON document (defaults filled in)."""

    raw: dict
    system: StateAffineSystem = field(repr=False)
    feedback: FeedbackLaw = field(repr=False)
    family: TemplateFamily = field(repr=False)
    theta: float
    delta: float
    T_final: float
    substeps: int
    x0: np.ndarray = field(repr=False)
    xhat0: np.ndarray = field(repr=False)
    S0: np.ndarray = field(repr=False)
    s0: float
    mu0: float | None
    R0: np.ndarray | None = field(repr=False)
    lambda_bar: float | None
    mu_grid: int
    rot_grid: int
    seed: int
    output: str

    def loop_state(self) -> LoopState:
        """Initial hybrid state; unset ``mu0``/``R0`` are taken from ``lambda(xhat0)``."""
        base = initial_state(self.x0, self.xhat0, self.S0, self.feedback, self.system.p, self.s0)
        mu = base.mu if self.mu0 is None else self.mu0
        R = base.R if self.R0 is None else self.R0
        return LoopState(self.x0, self.xhat0, self.S0, s=self.s0, mu=mu, R=R)


def _fill_defaults(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            sub = out.setdefault(key, {})
            for k2, v2 in val.items():
                sub.setdefault(k2, v2)
        else:
            out.setdefault(key, val)
    tpl = out["template"]
    if tpl["kind"] == "genpos":
        tpl.setdefault("d", None)
        tpl.setdefault("anchors", None)
    tpl.setdefault("T", None)
    return out


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _build_system(sysdoc: dict) -> StateAffineSystem:
    n, m, p = sysdoc["n"], sysdoc["m"], sysdoc["p"]
    A, C, b = sysdoc["A"], sysdoc["C"], sysdoc["b"]
    if len(A) != n or any(len(r) != n for r in A):
        raise ValidationError(f"must be {n}x{n}", field="system.A")
    if len(C) != m or any(len(r) != n for r in C):
        raise ValidationError(f"must be {m}x{n}", field="system.C")
    if len(b) != n:
        raise ValidationError(f"must have {n} entries", field="system.b")
    try:
        return StateAffineSystem(
            PolyMatrix.from_encoding(p, A),
            PolyMatrix.from_encoding(p, C),
            [MultiPoly.from_encoding(p, e) for e in b],
        )
    except ValueError as exc:
        raise ValidationError(str(exc), field="system") from exc


def _build_family(tpl: dict, sys: StateAffineSystem) -> TemplateFamily:
    kind = tpl["kind"]
    T = tpl.get("T") or float("inf")
    if kind == "siso":
        if sys.p != 1:
            raise ValidationError(f"siso template needs p=1, system has p={sys.p}", field="template.kind")
        if "N" not in tpl:
            raise ValidationError("siso template needs N", field="template.N")
        return siso_family(tpl["N"], T)
    if kind == "square":
        if sys.p != 2:
            raise ValidationError(f"square template needs p=2, system has p={sys.p}", field="template.kind")
        return square_family(T)
    if kind == "genpos":
        d = tpl.get("d")
        d = sys.degree_bound() if d is None else d
        return genpos_family(d, sys.p, tpl.get("anchors"), T)
    if "points" not in tpl:
        raise ValidationError("explicit template needs points", field="template.points")
    pts = np.asarray(tpl["points"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != sys.p:
        raise ValidationError(f"points must have {sys.p} columns", field="template.points")
    return explicit_family(pts, T)


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}", field="<document>") from exc
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ValidationError(err.message, field=_path(err))
    doc = _fill_defaults(doc)

    sys = _build_system(doc["system"])
    check_observable_at_target(sys)
    n, p = sys.n, sys.p

    fb = doc["feedback"]
    K = np.asarray(fb["K"], dtype=float)
    if K.shape != (p, n):
        raise ValidationError(f"must be {p}x{n}, got {K.shape[0]}x{K.shape[1]}", field="feedback.K")
    law = FeedbackLaw(K=K, radius=fb["saturation_radius"])

    family = _build_family(doc["template"], sys)

    ini = doc["initial"]
    x0 = np.asarray(ini["x0"], dtype=float)
    xhat0 = np.asarray(ini["xhat0"], dtype=float)
    if x0.size != n:
        raise ValidationError(f"must have length {n}", field="initial.x0")
    if xhat0.size != n:
        raise ValidationError(f"must have length {n}", field="initial.xhat0")
    if ini["S0"] == "identity":
        S0 = np.eye(n)
    else:
        S0 = np.asarray(ini["S0"], dtype=float)
        if S0.shape != (n, n):
            raise ValidationError(f"must be {n}x{n}", field="initial.S0")
        if np.max(np.abs(S0 - S0.T)) > 1e-12:
            raise ValidationError("must be symmetric", field="initial.S0")
        try:
            np.linalg.cholesky(S0)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("must be positive-definite", field="initial.S0") from exc
    delta = float(doc["delta"])
    s0 = float(ini["s0"])
    if s0 > delta:
        raise ValidationError(f"timer must lie in [0, delta={delta}]", field="initial.s0")
    R0 = None
    if ini["R0"] is not None:
        R0 = np.asarray(ini["R0"], dtype=float)
        if R0.shape != (p, p) or np.linalg.norm(R0.T @ R0 - np.eye(p)) > 1e-10:
            raise ValidationError(f"must be a {p}x{p} orthogonal matrix", field="initial.R0")

    cert = doc["certify"]
    return ScenarioConfig(
        raw=doc,
        system=sys,
        feedback=law,
        family=family,
        theta=float(doc["theta"]),
        delta=delta,
        T_final=float(doc["T_final"]),
        substeps=int(doc["substeps"]),
        x0=x0,
        xhat0=xhat0,
        S0=S0,
        s0=s0,
        mu0=ini["mu0"],
        R0=R0,
        lambda_bar=cert["lambda_bar"],
        mu_grid=int(cert["mu_grid"]),
        rot_grid=int(cert["rot_grid"]),
        seed=int(cert["seed"]),
        output=doc["output"],
    )


def serialize_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.raw, indent=2) + "\n"


def example_config_text() -> str:
    return resources.files("ctemplates.data").joinpath(EXAMPLE_NAME).read_text()


def load_example() -> ScenarioConfig:
    return parse_config(example_config_text())

