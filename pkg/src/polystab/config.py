"""Run configuration: JSON schema, function presets and their modal expansion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from .acoustic_model import AcousticPerturbation, AcousticSystem
from .perturbation_check import (ALMOST_DISSIPATIVE, FINITE_RANK, HILBERT_SCHMIDT, RANK_ONE,
                                 WEBSTER_RANK_ONE, InvalidParameter, Perturbation)
from .spectral_model import (CUSTOM, RECTANGLE, WEBSTER, ModalBasis, ModalVector, custom_basis,
                             expand, rectangle_basis, synthesize, webster_basis)
from .truncation import Viscous, WeakRankOne

ACOUSTIC = "acoustic"
ACOUSTIC_BG11 = "acoustic_bg11"
ACOUSTIC_B2G0 = "acoustic_b2g0"
SMOOTH = 99  # Sobolev order recorded for analytic presets

DEFAULT_N = {WEBSTER: 200, RECTANGLE: 100, ACOUSTIC: 256}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_SCALAR = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

FUNCTION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "minProperties": 1,
    "properties": {
        "polynomial": {"type": "array", "minItems": 1,
                       "items": {"oneOf": [_NUM, {"type": "array", "items": _NUM}]}},
        "sine": {"type": "array", "minItems": 1,
                 "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}},
        "indicator": {"type": "array", "minItems": 2, "maxItems": 2,
                      "items": {"oneOf": [_NUM, {"type": "array", "items": _NUM,
                                                 "minItems": 2, "maxItems": 2}]}},
        "constant": _NUM,
        "modal": {"type": "array", "items": _SCALAR, "minItems": 1},
        "scale": _NUM,
    },
    "oneOf": [{"required": [k]} for k in ("polynomial", "sine", "indicator", "constant", "modal")],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {"enum": [WEBSTER, RECTANGLE, CUSTOM, ACOUSTIC]},
        "a": {"type": "number", "minimum": 0},
        "b": _POS,
        "eigenvalues": {"type": "array", "items": _POS, "minItems": 1},
        "N": {"type": "integer", "minimum": 1},
        "k": _POS,
        "d": _POS,
        "damping": {
            "type": "object", "additionalProperties": False, "required": ["type"],
            "properties": {"type": {"enum": ["weak", "viscous", "none"]},
                           "function": FUNCTION_SCHEMA,
                           "sup": {"type": "number", "minimum": 0}},
        },
        "perturbation": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": [RANK_ONE, FINITE_RANK, HILBERT_SCHMIDT, ALMOST_DISSIPATIVE,
                                  WEBSTER_RANK_ONE, ACOUSTIC_BG11, ACOUSTIC_B2G0]},
                "terms": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"b": FUNCTION_SCHEMA, "c1": FUNCTION_SCHEMA,
                                   "c2": FUNCTION_SCHEMA}}},
                "b2": FUNCTION_SCHEMA, "c": FUNCTION_SCHEMA,
                "c1": FUNCTION_SCHEMA, "c2": FUNCTION_SCHEMA,
                "c3": _SCALAR, "c4": _SCALAR,
                "b2_order": {"type": "integer", "minimum": 0},
                "c_order": {"type": "integer", "minimum": 0},
            },
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
        "beta": {"type": "number", "minimum": 0, "maximum": 1},
        "gamma": {"type": "number", "minimum": 0, "maximum": 1},
        "kappa": {"oneOf": [_POS, {"enum": ["certificate", "numeric"]}]},
        "M": {"type": "number", "minimum": 1},
        "s0": _POS,
        "optimize_s0": {"type": "boolean"},
        "grid": {"type": "object", "additionalProperties": False,
                 "properties": {"s_min": {"type": "number", "minimum": 0}, "s_max": _POS,
                                "step": _POS}},
        "n": {"enum": [0, 1, 2]},
        "t_max": _POS,
        "steps": {"type": "integer", "minimum": 10},
        "smoothness": {"type": "integer", "minimum": 1, "maximum": 4},
        "profile": {"enum": ["critical", "random"]},
        "seed": {"type": "integer", "minimum": 0},
        "svg": {"type": "boolean"},
    },
    "allOf": [
        {"if": {"properties": {"model": {"const": RECTANGLE}}},
         "then": {"required": ["a", "b"], "properties": {"a": _POS}}},
        {"if": {"properties": {"model": {"const": CUSTOM}}}, "then": {"required": ["eigenvalues"]}},
    ],
}


class ConfigError(ValueError):
    """Configuration rejected; carries a machine-readable reason."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class FunctionData:
    f: Callable
    df: Callable | None
    d2f: Callable | None
    order: int
    spec: dict


@dataclass
class RunConfig:
    raw: dict
    model: str
    basis: ModalBasis | None = None
    acoustic: AcousticSystem | None = None
    damping: Any = None
    damping_data: FunctionData | None = None
    damping_vector: ModalVector | None = None
    perturbation: Any = None
    expansions: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def N(self) -> int:
        if self.model == ACOUSTIC:
            return self.acoustic.N
        return self.basis.size


# --- presets -----------------------------------------------------------------

def _complex(v):
    return complex(v[0], v[1]) if isinstance(v, list) else float(v)


def make_function(spec: dict, model: str, basis: ModalBasis | None = None) -> FunctionData:
    """Callable (and exact derivatives where available) for a preset."""
    scale = float(spec.get("scale", 1.0))
    two_d = model == RECTANGLE
    if "constant" in spec:
        c = scale * float(spec["constant"])
        f = lambda *x: np.full(np.shape(x[0]), c)
        zero = lambda *x: np.zeros(np.shape(x[0]))
        return FunctionData(f, zero, zero, SMOOTH, spec)
    if "polynomial" in spec:
        coeffs = spec["polynomial"]
        if two_d:
            C = np.array([row if isinstance(row, list) else [row] for row in coeffs], dtype=float)
            return FunctionData(
                lambda x, y: scale * np.polynomial.polynomial.polyval2d(x, y, C),
                None, None, SMOOTH, spec)
        if any(isinstance(c, list) for c in coeffs):
            raise ConfigError("invalid_function", "nested polynomial coefficients need a 2-D model")
        P = np.polynomial.Polynomial(np.array(coeffs, dtype=float) * scale)
        return FunctionData(P, P.deriv(1), P.deriv(2), SMOOTH, spec)
    if "sine" in spec:
        terms = spec["sine"]
        if two_d:
            if any(len(t) != 3 for t in terms):
                raise ConfigError("invalid_function", "rectangle sine terms are [j, k, amplitude]")
            a, b = basis.params["a"], basis.params["b"]
            f = lambda x, y: scale * sum(t[2] * np.sin(t[0] * math.pi * x / a)
                                         * np.sin(t[1] * math.pi * y / b) for t in terms)
            return FunctionData(f, None, None, SMOOTH, spec)
        if any(len(t) != 2 for t in terms):
            raise ConfigError("invalid_function", "sine terms are [n, amplitude]")
        f = lambda x: scale * sum(t[1] * np.sin(t[0] * math.pi * np.asarray(x)) for t in terms)
        df = lambda x: scale * sum(t[1] * t[0] * math.pi * np.cos(t[0] * math.pi * np.asarray(x))
                                   for t in terms)
        d2f = lambda x: -scale * sum(t[1] * (t[0] * math.pi) ** 2 * np.sin(t[0] * math.pi * np.asarray(x))
                                     for t in terms)
        return FunctionData(f, df, d2f, SMOOTH, spec)
    if "indicator" in spec:
        box = spec["indicator"]
        if two_d:
            if not all(isinstance(r, list) for r in box):
                raise ConfigError("invalid_function", "rectangle indicator is [[x0, x1], [y0, y1]]")
            (x0, x1), (y0, y1) = box
            f = lambda x, y: scale * ((x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)).astype(float)
        else:
            if any(isinstance(r, list) for r in box):
                raise ConfigError("invalid_function", "indicator is [lo, hi]")
            lo, hi = box
            f = lambda x: scale * ((np.asarray(x) >= lo) & (np.asarray(x) <= hi)).astype(float)
        return FunctionData(f, None, None, 0, spec)
    if "modal" in spec:
        if basis is None or not basis.has_evaluator:
            raise ConfigError("invalid_function", "modal data has no pointwise form for this model")
        v = modal_vector(spec, basis)
        return FunctionData(lambda *x: synthesize(v, *x), None, None, SMOOTH, spec)
    raise ConfigError("invalid_function", f"unknown preset {sorted(spec)}")


def modal_vector(spec: dict, basis: ModalBasis) -> ModalVector:
    coeffs = [_complex(c) for c in spec["modal"]]
    if len(coeffs) > basis.size:
        raise ConfigError("invalid_function", f"{len(coeffs)} modal coefficients exceed N={basis.size}")
    arr = np.array(coeffs) * float(spec.get("scale", 1.0))
    return ModalVector(basis, arr, True, note="modal preset")


def expand_preset(spec: dict | None, basis: ModalBasis, label: str, record: dict) -> ModalVector | None:
    """Modal coefficients of a preset; the expansion is recorded under ``label``."""
    if spec is None:
        return None
    if "modal" in spec:
        v = modal_vector(spec, basis)
        record[label] = {"preset": spec, "method": "direct", "coefficients": _coeff_list(v)}
        return v
    if not basis.has_evaluator:
        raise ConfigError("invalid_function", "custom bases accept only modal presets")
    fd = make_function(spec, basis.family, basis)
    nodes = basis.default_nodes()
    v = expand(fd.f, basis, quad_nodes=nodes)
    v = ModalVector(basis, v.coefficients, True, note=f"expanded {label}")
    record[label] = {"preset": spec, "method": "gauss-legendre", "quad_nodes": nodes,
                     "coefficients": _coeff_list(v)}
    return v


def _coeff_list(v: ModalVector) -> list:
    c = v.coefficients
    if np.iscomplexobj(c):
        return [[float(z.real), float(z.imag)] for z in c]
    return [float(z) for z in c]


# --- loading -----------------------------------------------------------------

def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError("schema", f"{where}: {e.message}")


def build_basis(raw: dict) -> ModalBasis:
    model = raw["model"]
    N = raw.get("N", DEFAULT_N.get(model))
    if model == WEBSTER:
        return webster_basis(float(raw.get("a", 2.0)), N)
    if model == RECTANGLE:
        return rectangle_basis(float(raw["a"]), float(raw["b"]), N)
    eig = raw["eigenvalues"]
    if N is not None and N < len(eig):
        eig = eig[:N]
    return custom_basis(eig)


def load_config(source) -> RunConfig:
    """Validate a dict or a JSON file path and expand every preset."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("unreadable", f"cannot read config: {exc}") from exc
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ConfigError("schema", "config must be a JSON object")
    validate(raw)
    model = raw["model"]
    cfg = RunConfig(raw=raw, model=model)
    pert = raw.get("perturbation")
    if model == ACOUSTIC:
        try:
            cfg.acoustic = AcousticSystem(k=float(raw.get("k", 1.0)), d=float(raw.get("d", 1.0)),
                                          N=int(raw.get("N", DEFAULT_N[ACOUSTIC])))
        except InvalidParameter as exc:
            raise ConfigError("invalid_parameter", str(exc)) from exc
        if "damping" in raw:
            raise ConfigError("schema", "acoustic model takes k and d, not a damping block")
        if pert is not None:
            cfg.perturbation = _acoustic_perturbation(pert, cfg)
        return cfg
    if pert is not None and pert["kind"] in (ACOUSTIC_BG11, ACOUSTIC_B2G0):
        raise ConfigError("schema", f"{pert['kind']} needs model 'acoustic'")
    try:
        cfg.basis = build_basis(raw)
    except ValueError as exc:
        raise ConfigError("invalid_parameter", str(exc)) from exc
    _load_damping(raw.get("damping"), cfg)
    if pert is not None:
        cfg.perturbation = _wave_perturbation(pert, cfg)
    return cfg


def _load_damping(spec: dict | None, cfg: RunConfig) -> None:
    if spec is None or spec["type"] == "none":
        return
    if "function" not in spec:
        raise ConfigError("schema", "damping needs a function preset")
    basis = cfg.basis
    if spec["type"] == "weak":
        v = expand_preset(spec["function"], basis, "damping", cfg.expansions)
        cfg.damping_vector = v
        cfg.damping = WeakRankOne(v)
        if basis.has_evaluator and "modal" not in spec["function"]:
            cfg.damping_data = make_function(spec["function"], basis.family, basis)
        return
    if not basis.has_evaluator:
        raise ConfigError("invalid_parameter", "viscous damping needs a basis with eigenfunctions")
    fd = make_function(spec["function"], basis.family, basis)
    cfg.damping_data = fd
    cfg.damping = Viscous(fd.f)
    cfg.expansions["damping"] = {"preset": spec["function"], "method": "pointwise"}


def _wave_perturbation(p: dict, cfg: RunConfig):
    kind, basis, rec = p["kind"], cfg.basis, cfg.expansions
    if kind == ALMOST_DISSIPATIVE:
        if "b2" not in p:
            raise ConfigError("schema", "almost-dissipative perturbation needs b2")
        b2 = expand_preset(p["b2"], basis, "perturbation.b2", rec)
        c = expand_preset(p.get("c"), basis, "perturbation.c", rec)
        return Perturbation(ALMOST_DISSIPATIVE, (b2,), (c,), (None,))
    terms = p.get("terms")
    if terms is None:
        terms = [{k: p[k] for k in ("b", "c1", "c2") if k in p}] if "b2" not in p else \
            [{"b": p["b2"], **{k: p[k] for k in ("c1", "c2") if k in p}}]
    bs, c1s, c2s = [], [], []
    zero = ModalVector(basis, np.zeros(1), True)
    for i, t in enumerate(terms):
        b = expand_preset(t.get("b"), basis, f"perturbation.terms[{i}].b", rec)
        bs.append(b if b is not None else zero)
        c1s.append(expand_preset(t.get("c1"), basis, f"perturbation.terms[{i}].c1", rec))
        c2s.append(expand_preset(t.get("c2"), basis, f"perturbation.terms[{i}].c2", rec))
    try:
        return Perturbation(kind, tuple(bs), tuple(c1s), tuple(c2s))
    except InvalidParameter as exc:
        raise ConfigError("invalid_parameter", str(exc)) from exc


def _acoustic_perturbation(p: dict, cfg: RunConfig) -> AcousticPerturbation:
    if p["kind"] not in (ACOUSTIC_BG11, ACOUSTIC_B2G0):
        raise ConfigError("schema", f"model 'acoustic' takes acoustic_bg11 or acoustic_b2g0, not {p['kind']}")
    fns = {}
    for key in ("b2", "c1", "c2"):
        if key in p:
            fns[key] = make_function(p[key], ACOUSTIC)
            cfg.expansions[f"perturbation.{key}"] = {"preset": p[key], "method": "pointwise",
                                                     "order": fns[key].order}
    get = lambda key, attr: getattr(fns[key], attr) if key in fns else None
    b2_order = p.get("b2_order", fns["b2"].order if "b2" in fns else SMOOTH)
    c_order = p.get("c_order", min([fns[k].order for k in ("c1", "c2") if k in fns] or [SMOOTH]))
    return AcousticPerturbation(
        b2=get("b2", "f"), c1=get("c1", "f"), c2=get("c2", "f"),
        c3=_complex(p.get("c3", 0.0)), c4=_complex(p.get("c4", 0.0)),
        b2_order=b2_order, c_order=c_order,
        db2=get("b2", "df"), d2b2=get("b2", "d2f"), dc1=get("c1", "df"), dc2=get("c2", "df"))
