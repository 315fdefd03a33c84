"""Admissibility conditions for perturbations of damped wave equations.

All checks compare a measured norm with a threshold built from ``kappa`` and
the interpolation constants ``K_theta = exp(pi^2 theta (1 - theta)/2) M^theta``.
Inequalities are strict: equality fails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral_model import (ModalBasis, ModalVector, expand, fractional_norm,
                             inv_sqrt_norm, synthesize, vector_from_dict)

RANK_ONE = "rank_one"
FINITE_RANK = "finite_rank"
HILBERT_SCHMIDT = "hilbert_schmidt"
ALMOST_DISSIPATIVE = "almost_dissipative"
WEBSTER_RANK_ONE = "webster_rank_one"

_ALPHA_TOL = 1e-12


class InvalidParameter(ValueError):
    """Inputs outside the range where the conditions are defined (not a failed condition)."""


@dataclass(frozen=True)
class Condition:
    name: str
    measured: float
    threshold: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.measured < self.threshold)

    def to_dict(self) -> dict:
        out = {"name": self.name, "measured": self.measured,
               "threshold": self.threshold, "pass": self.passed}
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class CheckReport:
    kind: str
    alpha: float
    beta: float
    gamma: float
    K_beta: float
    K_gamma: float
    M: float
    kappa: float
    conditions: tuple[Condition, ...]
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failing(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
            "K_beta": self.K_beta, "K_gamma": self.K_gamma, "M": self.M, "kappa": self.kappa,
            "conditions": [c.to_dict() for c in self.conditions],
            "verdict": "pass" if self.verdict else "fail",
            "diagnostics": self.diagnostics, "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class Perturbation:
    """Modal perturbation data ``B_2 y = sum_k b_k y_k``, ``C_1 w = (<w, c1_k>)_k``, ``C_2 v = (<v, c2_k>)_k``.

    ``None`` entries in the c-lists stand for zero functions.  For the
    almost-dissipative kind ``b`` holds ``b_2`` and ``c1`` holds ``c``.
    """

    kind: str
    b: tuple[ModalVector, ...] = ()
    c1: tuple[ModalVector | None, ...] = ()
    c2: tuple[ModalVector | None, ...] = ()

    def __post_init__(self):
        for name in ("b", "c1", "c2"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in (RANK_ONE, FINITE_RANK, HILBERT_SCHMIDT, WEBSTER_RANK_ONE,
                             ALMOST_DISSIPATIVE):
            raise InvalidParameter(f"unknown perturbation kind {self.kind!r}")
        lengths = {len(self.b), len(self.c1), len(self.c2)}
        if self.kind == ALMOST_DISSIPATIVE:
            if len(self.b) != 1 or len(self.c1) != 1:
                raise InvalidParameter("almost-dissipative data needs exactly one b2 and one c")
            return
        if len(lengths) != 1:
            raise InvalidParameter(f"b, c1, c2 lists differ in length: {sorted(lengths)}")
        if self.kind in (RANK_ONE, WEBSTER_RANK_ONE) and self.m != 1:
            raise InvalidParameter(f"{self.kind} needs exactly one term (got {self.m})")
        if self.kind == FINITE_RANK and self.m < 1:
            raise InvalidParameter("finite-rank perturbation needs m >= 1")

    @property
    def m(self) -> int:
        return len(self.b)

    @classmethod
    def rank_one(cls, b2, c1=None, c2=None, webster: bool = False) -> "Perturbation":
        return cls(WEBSTER_RANK_ONE if webster else RANK_ONE, (b2,), (c1,), (c2,))

    def scaled(self, tb: float = 1.0, tc: float = 1.0) -> "Perturbation":
        sc = lambda v, t: None if v is None else v.scaled(t)
        return Perturbation(self.kind, tuple(sc(v, tb) for v in self.b),
                            tuple(sc(v, tc) for v in self.c1), tuple(sc(v, tc) for v in self.c2))

    def to_dict(self) -> dict:
        enc = lambda v: None if v is None else v.to_dict()
        return {"kind": self.kind, "b": [enc(v) for v in self.b],
                "c1": [enc(v) for v in self.c1], "c2": [enc(v) for v in self.c2]}

    @classmethod
    def from_dict(cls, d: dict, basis: ModalBasis | None = None) -> "Perturbation":
        dec = lambda v: None if v is None else vector_from_dict(v, basis)
        return cls(d["kind"], tuple(dec(v) for v in d.get("b", [])),
                   tuple(dec(v) for v in d.get("c1", [])), tuple(dec(v) for v in d.get("c2", [])))


# --- constants -------------------------------------------------------------

def k_theta(theta: float, M: float) -> float:
    """Interpolation constant ``e^{pi^2 theta (1 - theta)/2} M^theta``."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameter(f"theta={theta} outside [0, 1]")
    if not M >= 1.0:
        raise InvalidParameter(f"M={M} must be >= 1")
    if theta == 0.0:
        return 1.0
    if theta == 1.0:
        return float(M)
    return math.exp(0.5 * math.pi ** 2 * theta * (1.0 - theta)) * M ** theta


def m_constant(context: str = "generic", **p) -> float:
    """``M = 1 + ||D_0||^2 ||(-L)^{-1/2}||`` specialised to each model.

    contexts and their keyword arguments:
      generic: norm_D, inv_sqrt (or basis)
      rectangle: a, b, d_sup   (||D_0||^2 = ||d||_inf)
      webster: a, d_norm       (||D_0|| = ||d|| in L^2_a)
      almost_dissipative: a, b, d_sup   (uses ||d||_inf^2)
    """
    if context == "generic":
        r = p["inv_sqrt"] if "inv_sqrt" in p else inv_sqrt_norm(p["basis"])
        return 1.0 + float(p["norm_D"]) ** 2 * r
    if context in ("rectangle", "almost_dissipative"):
        a, b, d_sup = float(p["a"]), float(p["b"]), float(p["d_sup"])
        if a <= 0 or b <= 0 or d_sup < 0:
            raise InvalidParameter("need a, b > 0 and ||d||_inf >= 0")
        r = a * b / (math.pi * math.sqrt(a * a + b * b))
        return 1.0 + (d_sup ** 2 if context == "almost_dissipative" else d_sup) * r
    if context == "webster":
        a, d_norm = float(p["a"]), float(p["d_norm"])
        if a < 0 or d_norm < 0:
            raise InvalidParameter("need a >= 0 and ||d|| >= 0")
        return 1.0 + d_norm ** 2 / math.sqrt(a * a / 4.0 + math.pi ** 2)
    raise InvalidParameter(f"unknown context {context!r}")


def select_exponents(alpha: float) -> list[tuple[float, float]]:
    """Canonical ``(beta, gamma)`` pairs with ``0 <= beta, gamma <= 1`` and ``beta + gamma >= alpha``."""
    if not 0 < alpha <= 2:
        raise InvalidParameter(f"alpha={alpha} outside (0, 2]")
    cands = [(1.0, 1.0)]
    if alpha >= 1:
        cands += [(alpha - 1.0, 1.0), (1.0, alpha - 1.0)]
    if alpha <= 1:
        cands += [(alpha, 0.0), (0.0, alpha)]
    out = []
    for bg in cands:
        if bg not in out and _valid_pair(alpha, *bg):
            out.append(bg)
    return out


def _valid_pair(alpha, beta, gamma) -> bool:
    return 0 <= beta <= 1 and 0 <= gamma <= 1 and beta + gamma >= alpha - _ALPHA_TOL


def _validate(alpha, beta, gamma, kappa, M):
    if not 0 < alpha <= 2:
        raise InvalidParameter(f"alpha={alpha} outside (0, 2]")
    for name, v in (("beta", beta), ("gamma", gamma)):
        if not 0 <= v <= 1:
            raise InvalidParameter(f"{name}={v} outside [0, 1]")
    if beta + gamma < alpha - _ALPHA_TOL:
        raise InvalidParameter(f"beta + gamma = {beta + gamma} < alpha = {alpha}")
    if not kappa > 0:
        raise InvalidParameter("kappa must be positive")
    if not M >= 1:
        raise InvalidParameter("M must be >= 1")


def _norm(v: ModalVector | None, theta: float) -> float:
    return 0.0 if v is None else fractional_norm(v, theta)


def _c_side(c1, c2, gamma) -> float:
    return _norm(c1, (gamma - 1.0) / 2.0) ** 2 + _norm(c2, gamma / 2.0) ** 2


def _report(kind, alpha, beta, gamma, kappa, M, conditions, **diag) -> CheckReport:
    return CheckReport(
        kind=kind, alpha=float(alpha), beta=float(beta), gamma=float(gamma),
        K_beta=k_theta(beta, M), K_gamma=k_theta(gamma, M), M=float(M), kappa=float(kappa),
        conditions=tuple(conditions), diagnostics=diag,
        provenance={"K_theta": "exp(pi^2 theta (1-theta)/2) M^theta",
                    "b": "||(-L)^(beta/2) b||", "c": "||(-L)^((gamma-1)/2) c1||^2 + ||(-L)^(gamma/2) c2||^2"},
    )


# --- checkers --------------------------------------------------------------

def check_rank_one(p: Perturbation, alpha, beta, gamma, kappa, M) -> CheckReport:
    _validate(alpha, beta, gamma, kappa, M)
    if p.m != 1:
        raise InvalidParameter("rank-one check needs exactly one term")
    Kb, Kg = k_theta(beta, M), k_theta(gamma, M)
    conds = [
        Condition("b", _norm(p.b[0], beta / 2.0), kappa / Kb),
        Condition("c", _c_side(p.c1[0], p.c2[0], gamma), kappa ** 2 / Kg ** 2),
    ]
    return _report(p.kind, alpha, beta, gamma, kappa, M, conds)


def check_finite_rank(p: Perturbation, alpha, beta, gamma, kappa, M) -> CheckReport:
    _validate(alpha, beta, gamma, kappa, M)
    m = p.m
    if m < 1:
        raise InvalidParameter("finite-rank check needs m >= 1")
    Kb, Kg = k_theta(beta, M), k_theta(gamma, M)
    conds = []
    for k in range(m):
        conds.append(Condition(f"b[{k + 1}]", _norm(p.b[k], beta / 2.0), kappa / (m * Kb)))
        conds.append(Condition(f"c[{k + 1}]", _c_side(p.c1[k], p.c2[k], gamma),
                               kappa ** 2 / (m * m * Kg * Kg)))
    return _report(FINITE_RANK, alpha, beta, gamma, kappa, M, conds, m=m)


def check_hilbert_schmidt(p: Perturbation, alpha, beta, gamma, kappa, M) -> CheckReport:
    """Summed conditions over the declared terms; the last term is reported as a tail indicator."""
    _validate(alpha, beta, gamma, kappa, M)
    Kb, Kg = k_theta(beta, M), k_theta(gamma, M)
    b_terms = [_norm(v, beta / 2.0) ** 2 for v in p.b]
    c_terms = [_c_side(c1, c2, gamma) for c1, c2 in zip(p.c1, p.c2)]
    conds = [
        Condition("b", math.fsum(b_terms), kappa ** 2 / Kb ** 2),
        Condition("c", math.fsum(c_terms), kappa ** 2 / Kg ** 2),
    ]
    tail = {"terms": p.m,
            "last_b_term": b_terms[-1] if b_terms else 0.0,
            "last_c_term": c_terms[-1] if c_terms else 0.0}
    return _report(HILBERT_SCHMIDT, alpha, beta, gamma, kappa, M, conds, tail=tail)


def check_almost_dissipative(b2: ModalVector, c: ModalVector | None, d: Callable,
                             kappa: float, M: float | None = None, alpha: float = 2.0,
                             d_smoothness: int = 2, d_sup: float | None = None,
                             quad_nodes: int | None = None) -> CheckReport:
    """Conditions for ``w_tt - Delta w + d w_t = b_2 <sqrt(d) w_t, c>``.

    Two forms of the b-condition are evaluated.  The stated form uses
    ``||d b_2||^2_{H_{1/2}} + ||b_2||^2_{H^1}`` (Sobolev ``H^1``) with
    ``M = 1 + ||d||_inf^2 ||(-L)^{-1/2}||``.  The chain behind it bounds
    ``||A^2 B||`` by ``(1 + ||d||_inf ||(-L)^{-1/2}||)(||(-L)^{1/2}(d b_2)||^2 + ||L b_2||^2)^{1/2}``.
    Both are checked against ``kappa^2/M^2`` with the larger of the two ``M``.
    """
    if d_smoothness < 2:
        raise InvalidParameter("d must be C^2: dom A^2 is characterised only for smooth damping")
    if not kappa > 0:
        raise InvalidParameter("kappa must be positive")
    if not 0 < alpha <= 2:
        raise InvalidParameter(f"alpha={alpha} outside (0, 2]")
    basis = b2.basis
    if not basis.has_evaluator:
        raise InvalidParameter("almost-dissipative check needs pointwise eigenfunctions")
    nodes = quad_nodes or basis.default_nodes()
    coords, w = basis.quadrature(nodes)
    dv = np.broadcast_to(np.asarray(d(*coords), dtype=float), w.shape)
    if np.any(dv < -1e-14):
        raise InvalidParameter("damping d must be nonnegative")
    if d_sup is None:
        d_sup = float(np.max(np.abs(dv)))
    r = inv_sqrt_norm(basis)
    M_stated = 1.0 + d_sup ** 2 * r
    M_chain = 1.0 + d_sup * r
    M_gate = max(M_stated, M_chain) if M is None else max(M, M_stated, M_chain)

    cvals = 0.0 if c is None else synthesize(c, *coords)
    c_meas = float(math.sqrt(np.sum(np.clip(dv, 0, None) * np.abs(cvals) ** 2 * w)))

    b2n = b2.as_normalized()
    mu = basis.eigenvalues[: b2n.N]
    bc = b2n.coefficients
    db2 = expand(lambda *x: np.asarray(d(*x)) * synthesize(b2n, *x), basis, quad_nodes=nodes)
    db2_half = fractional_norm(db2, 0.5) ** 2
    h1 = float(np.sum((1.0 + mu) * np.abs(bc) ** 2))
    lap = float(np.sum(mu ** 2 * np.abs(bc) ** 2))
    thr = kappa ** 2 / M_gate ** 2
    conds = [
        Condition("c: ||sqrt(d) c||", c_meas, kappa),
        Condition("b stated: ||d b2||^2_H1/2 + ||b2||^2_H1", db2_half + h1, thr),
        Condition("b chain: ||(-L)^1/2 (d b2)||^2 + ||L b2||^2", db2_half + lap, thr),
    ]
    diag = {"M_stated": M_stated, "M_chain": M_chain, "M_gate": M_gate, "d_sup": d_sup,
            "chain_minus_stated": (db2_half + lap) - (db2_half + h1),
            "M_discrepancy": M_stated - M_chain}
    rep = CheckReport(
        kind=ALMOST_DISSIPATIVE, alpha=float(alpha), beta=2.0, gamma=0.0,
        K_beta=M_gate, K_gamma=1.0, M=M_gate, kappa=float(kappa), conditions=tuple(conds),
        diagnostics=diag,
        provenance={"M_stated": "1 + ||d||_inf^2 mu_1^-1/2", "M_chain": "1 + ||d||_inf mu_1^-1/2",
                    "K_beta": "M used as the A^2 B factor", "K_gamma": "K_0 = 1"},
    )
    return rep


def check(p: Perturbation, alpha, beta, gamma, kappa, M) -> CheckReport:
    """Dispatch on the perturbation kind."""
    if p.kind in (RANK_ONE, WEBSTER_RANK_ONE):
        return check_rank_one(p, alpha, beta, gamma, kappa, M)
    if p.kind == FINITE_RANK:
        return check_finite_rank(p, alpha, beta, gamma, kappa, M)
    if p.kind == HILBERT_SCHMIDT:
        return check_hilbert_schmidt(p, alpha, beta, gamma, kappa, M)
    raise InvalidParameter("almost-dissipative data goes through check_almost_dissipative")


def best_pair(p: Perturbation, alpha, kappa, M) -> CheckReport:
    """Run every canonical ``(beta, gamma)`` and return the first passing report (else the first)."""
    reports = [check(p, alpha, b, g, kappa, M) for b, g in select_exponents(alpha)]
    return next((r for r in reports if r.verdict), reports[0])
