"""Wave equation on (0, 1) with an acoustic boundary oscillator at x = 1.

State ``u = (w_x, w_t, a, a_t)`` in ``L^2 x L^2 x C^2`` with norm
``||u||^2 = ||u_1||^2 + ||u_2||^2 + k |u_3|^2 + |u_4|^2`` and generator

    u_1' = u_2',  u_2' = u_1',  u_3' = u_4,  u_4' = -u_1(1) - k u_3 - d u_4,

on ``u_2(0) = 0``, ``u_2(1) = u_4``.  Perturbations ``B C`` act through
``B = (0, b_2, 0, 0)`` and ``C u = <u_1, c_1> + <u_2, c_2> + k u_3 conj(c_3) + u_4 conj(c_4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import Chebyshev

from .kappa_bounds import resolvent_sup
from .perturbation_check import CheckReport, Condition, InvalidParameter
from .spectral_model import gauss_legendre
from .truncation import TruncatedSystem

QUAD_NODES = 256
CHEB_DEGREE = 96
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class AcousticSystem:
    k: float = 1.0
    d: float = 1.0
    N: int = 256

    def __post_init__(self):
        if not (self.k > 0 and self.d > 0):
            raise InvalidParameter("spring constant k and damping d must be strictly positive")
        if self.N < 16:
            raise InvalidParameter("discretization needs N >= 16")

    def energy(self, u1, u2, u3, u4, nodes: int = QUAD_NODES) -> float:
        x, w = gauss_legendre(0.0, 1.0, nodes)
        return float(np.sum(w * (np.abs(u1(x)) ** 2 + np.abs(u2(x)) ** 2))
                     + self.k * abs(u3) ** 2 + abs(u4) ** 2)


@dataclass(frozen=True)
class AcousticPerturbation:
    """``b_2, c_1, c_2`` as callables on [0, 1] with declared Sobolev order.

    Derivatives may be supplied; otherwise they are taken from a Chebyshev
    interpolant.
    """

    b2: Callable | None = None
    c1: Callable | None = None
    c2: Callable | None = None
    c3: complex = 0.0
    c4: complex = 0.0
    b2_order: int = 2
    c_order: int = 1
    db2: Callable | None = None
    d2b2: Callable | None = None
    dc1: Callable | None = None
    dc2: Callable | None = None

    def scaled(self, tb: float = 1.0, tc: float = 1.0) -> "AcousticPerturbation":
        s = lambda f, t: None if f is None else (lambda x, f=f: t * np.asarray(f(x)))
        return AcousticPerturbation(
            s(self.b2, tb), s(self.c1, tc), s(self.c2, tc), tc * self.c3, tc * self.c4,
            self.b2_order, self.c_order, s(self.db2, tb), s(self.d2b2, tb),
            s(self.dc1, tc), s(self.dc2, tc))


_ZERO = lambda x: np.zeros_like(np.asarray(x, dtype=float))


def _derivative(f: Callable | None, given: Callable | None, order: int = 1) -> Callable:
    if f is None:
        return _ZERO
    if given is not None and order == 1:
        return given
    x = np.cos(np.pi * (np.arange(CHEB_DEGREE + 1) + 0.5) / (CHEB_DEGREE + 1)) * 0.5 + 0.5
    vals = np.asarray(f(x))
    if np.iscomplexobj(vals):
        re = Chebyshev.fit(x, vals.real, CHEB_DEGREE, domain=[0, 1]).deriv(order)
        im = Chebyshev.fit(x, vals.imag, CHEB_DEGREE, domain=[0, 1]).deriv(order)
        return lambda t: re(t) + 1j * im(t)
    return Chebyshev.fit(x, vals, CHEB_DEGREE, domain=[0, 1]).deriv(order)


def _l2(f: Callable | None) -> float:
    if f is None:
        return 0.0
    x, w = gauss_legendre(0.0, 1.0, QUAD_NODES)
    return float(math.sqrt(np.sum(w * np.abs(np.asarray(f(x))) ** 2)))


def _value(f: Callable | None, x: float) -> complex:
    return 0.0 if f is None else complex(np.asarray(f(np.array([x])))[0])


def _report(kind, beta, gamma, kappa, conds, diag) -> CheckReport:
    return CheckReport(kind=kind, alpha=2.0, beta=beta, gamma=gamma, K_beta=1.0, K_gamma=1.0,
                       M=1.0, kappa=float(kappa), conditions=tuple(conds), diagnostics=diag,
                       provenance={"kappa": "sup ||R(is,A) A^-2|| based, beta + gamma = 2",
                                   "K": "conditions are stated directly on A; no interpolation"})


def _require_h10(b2: Callable, scale: float):
    ends = (abs(_value(b2, 0.0)), abs(_value(b2, 1.0)))
    if max(ends) > BOUNDARY_TOL * max(1.0, scale):
        raise InvalidParameter(f"b2 must vanish at both ends (got |b2(0)|={ends[0]:.3e}, "
                               f"|b2(1)|={ends[1]:.3e})")


def check_acoustic_bg11(p: AcousticPerturbation, k: float, kappa: float) -> CheckReport:
    """Conditions for ``beta = gamma = 1``: ``||b_2'|| < kappa`` and
    ``4||c_1||_{H^1}^2 + ||c_2'||^2 + 3k^2|c_3|^2 < kappa^2``."""
    if not (k > 0 and kappa > 0):
        raise InvalidParameter("k and kappa must be positive")
    if p.c4 != 0:
        raise InvalidParameter("c4 must be 0 when beta = gamma = 1")
    if p.b2 is not None and p.b2_order < 1:
        raise InvalidParameter("b2 must lie in H^1_0")
    if (p.c1 is not None or p.c2 is not None) and p.c_order < 1:
        raise InvalidParameter("c1 and c2 must lie in H^1")
    db2 = _derivative(p.b2, p.db2)
    dc1 = _derivative(p.c1, p.dc1)
    dc2 = _derivative(p.c2, p.dc2)
    if p.b2 is not None:
        _require_h10(p.b2, _l2(db2))
    b_meas = _l2(db2)
    c1n, dc1n, dc2n = _l2(p.c1), _l2(dc1), _l2(dc2)
    c_bound = 4.0 * (c1n ** 2 + dc1n ** 2) + dc2n ** 2 + 3.0 * k * k * abs(p.c3) ** 2
    c1_at_1 = _value(p.c1, 1.0)
    direct = dc1n ** 2 + dc2n ** 2 + abs(c1_at_1 + k * p.c3) ** 2
    trace = (abs(_value(p.c2, 0.0)), abs(_value(p.c2, 1.0) - p.c4))
    conds = [
        Condition("b: ||b2'||", b_meas, kappa),
        Condition("c: 4||c1||^2_H1 + ||c2'||^2 + 3k^2|c3|^2", c_bound, kappa ** 2),
    ]
    diag = {
        "adjoint_norm_sq_direct": direct,
        "adjoint_bound_holds": bool(direct <= c_bound * (1 + 1e-12) + 1e-15),
        "c1_at_1_direct": abs(c1_at_1),
        "c1_at_1_bound": c1n + dc1n,
        # C* lies in dom A* only when c2(0) = 0 and c2(1) = c4
        "c2_trace_residual": max(trace),
    }
    return _report("acoustic_bg11", 1.0, 1.0, kappa, conds, diag)


def check_acoustic_b2g0(p: AcousticPerturbation, k: float, kappa: float) -> CheckReport:
    """Conditions for ``beta = 2, gamma = 0``.

    The stated b-condition ``||b_2'||_{H^1} < kappa`` and the form
    ``sqrt(3) ||b_2'||_{H^1} < kappa`` that the bound ``||A^2 B||^2 <= 3||b_2'||_{H^1}^2``
    supports are both evaluated; the latter is the stronger one and decides the verdict.
    """
    if not (k > 0 and kappa > 0):
        raise InvalidParameter("k and kappa must be positive")
    if p.b2 is not None:
        if p.b2_order < 2:
            raise InvalidParameter("b2 must lie in H^1_0 and H^2")
    db2 = _derivative(p.b2, p.db2)
    d2b2 = _derivative(db2, p.d2b2) if p.b2 is not None else _ZERO
    if p.b2 is not None:
        _require_h10(p.b2, _l2(db2))
    h1 = math.sqrt(_l2(db2) ** 2 + _l2(d2b2) ** 2)
    c_meas = (_l2(p.c1) ** 2 + _l2(p.c2) ** 2 + k * abs(p.c3) ** 2 + abs(p.c4) ** 2)
    direct = math.sqrt(_l2(d2b2) ** 2 + abs(_value(db2, 1.0)) ** 2) if p.b2 is not None else 0.0
    conds = [
        Condition("b stated: ||b2'||_H1", h1, kappa,
                  note="implied by the sqrt(3) form"),
        Condition("b conservative: sqrt(3)||b2'||_H1", math.sqrt(3.0) * h1, kappa),
        Condition("c: ||c1||^2 + ||c2||^2 + k|c3|^2 + |c4|^2", c_meas, kappa ** 2),
    ]
    diag = {"A2B_norm_direct": direct, "A2B_bound": math.sqrt(3.0) * h1,
            "stated_vs_conservative_gap": (math.sqrt(3.0) - 1.0) * h1}
    return _report("acoustic_b2g0", 2.0, 0.0, kappa, conds, diag)


# --- discretization -----------------------------------------------------------

@dataclass(frozen=True)
class AcousticDiscretization:
    """Staggered finite differences in energy coordinates.

    ``u_1`` sits at cell midpoints, ``u_2`` at the interior nodes; the boundary
    values ``u_2(0) = 0`` and ``u_2(1) = u_4`` are eliminated.  The full matrix
    (size ``2N + 1``) is skew apart from the ``-d`` entry, and has the kernel
    ``(1, 0, -1/k, 0)``; ``Q`` spans its orthogonal complement, which is
    invariant (``int u_1 - u_3`` is conserved), and ``A = Q^T A_full Q``.
    """

    system: AcousticSystem
    A_full: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    weights: np.ndarray
    cells: np.ndarray
    nodes: np.ndarray
    notes: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def damping_vector(self) -> np.ndarray:
        e = np.zeros(self.A_full.shape[0])
        e[-1] = 1.0
        return self.Q.T @ e

    def truncated(self) -> TruncatedSystem:
        e = self.damping_vector()[:, None]
        d = self.system.d
        A0 = self.A + d * (e @ e.T)
        A0 = 0.5 * (A0 - A0.T)
        return TruncatedSystem(A=self.A, N=self.system.N, A0=A0, low_rank=(-d * e, e),
                               label=f"acoustic N={self.system.N} k={self.system.k} d={d}",
                               notes=dict(self.notes))

    def perturbation(self, p: AcousticPerturbation) -> tuple[np.ndarray, np.ndarray]:
        """``B`` and ``C`` in restricted energy coordinates."""
        N, k = self.system.N, self.system.k
        h = 1.0 / N
        m = self.A_full.shape[0]
        B = np.zeros(m, dtype=complex)
        C = np.zeros(m, dtype=complex)
        if p.b2 is not None:
            B[N:2 * N - 1] = math.sqrt(h) * np.asarray(p.b2(self.nodes))
        if p.c1 is not None:
            C[:N] = math.sqrt(h) * np.conj(np.asarray(p.c1(self.cells)))
        if p.c2 is not None:
            C[N:2 * N - 1] = math.sqrt(h) * np.conj(np.asarray(p.c2(self.nodes)))
        C[2 * N - 1] = math.sqrt(k) * np.conj(p.c3)
        C[2 * N] = np.conj(p.c4)
        if not np.any(B.imag) and not np.any(C.imag):
            B, C = B.real, C.real
        return (self.Q.T @ B)[:, None], (C @ self.Q)[None, :]

    def perturbed(self, p: AcousticPerturbation) -> TruncatedSystem:
        B, C = self.perturbation(p)
        base = self.truncated()
        lr = (np.hstack([base.low_rank[0], B]), np.hstack([base.low_rank[1], C.conj().T]))
        return TruncatedSystem(A=self.A + B @ C, N=self.system.N, A0=base.A0, B=B, C=C,
                               low_rank=lr, label=base.label + " perturbed", notes=base.notes)


def acoustic_full_matrix(N: int, k: float, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Unrestricted generator (size ``2N + 1``) in energy coordinates, and the weights."""
    h = 1.0 / N
    m = 2 * N + 1
    A = np.zeros((m, m))
    ia, iv = 2 * N - 1, 2 * N
    u2 = lambda node: N + node - 1
    for c in range(N):
        if c + 1 == N:
            A[c, iv] += 1.0 / h
        else:
            A[c, u2(c + 1)] += 1.0 / h
        if c > 0:
            A[c, u2(c)] -= 1.0 / h
    for i in range(1, N):
        A[u2(i), i] += 1.0 / h
        A[u2(i), i - 1] -= 1.0 / h
    A[ia, iv] = 1.0
    A[iv, ia] = -k
    A[iv, iv] = -d
    A[iv, N - 1] = -1.0
    w = np.concatenate([np.full(2 * N - 1, math.sqrt(h)), [math.sqrt(k), 1.0]])
    return (w[:, None] * A) / w[None, :], w


def build_acoustic_discretization(N: int, k: float = 1.0, d: float = 1.0,
                                  system: AcousticSystem | None = None) -> AcousticDiscretization:
    sysm = system or AcousticSystem(k=k, d=d, N=N)
    if system is None and d <= 0:
        raise InvalidParameter("d must be positive; use acoustic_full_matrix for d = 0")
    A_full, w = acoustic_full_matrix(sysm.N, sysm.k, sysm.d)
    h = 1.0 / sysm.N
    kern = np.concatenate([np.full(sysm.N, math.sqrt(h)), np.zeros(sysm.N - 1),
                           [-1.0 / math.sqrt(sysm.k), 0.0]])
    kern /= np.linalg.norm(kern)
    Q = sla.null_space(kern[None, :])
    A = Q.T @ A_full @ Q
    cells = (np.arange(sysm.N) + 0.5) * h
    nodes = np.arange(1, sysm.N) * h
    notes = {"full_dim": int(A_full.shape[0]), "restricted_dim": int(A.shape[0]),
             "kernel_residual": float(np.max(np.abs(A_full @ kern))),
             "conserved": "int u_1 - u_3"}
    return AcousticDiscretization(sysm, A_full, Q, A, w, cells, nodes, notes)


def estimate_kappa_acoustic(N: int = 256, k: float = 1.0, d: float = 1.0, n: int = 2,
                            s_max: float = 50.0, step: float = 0.05,
                            threads: int | None = None) -> dict:
    """Non-certified ``kappa`` from ``sup_s ||R(is, A_N) A_N^{-n}||`` on ``[0, s_max]``.

    The grid stops well below the grid Nyquist frequency, where the discrete
    modes are nearly undamped and say nothing about the continuous system.
    """
    disc = build_acoustic_discretization(N, k, d)
    grid = np.arange(0.0, s_max + 0.5 * step, step)
    out = resolvent_sup(disc.truncated(), n, grid, threads=threads)
    out.update({"N": N, "k": k, "d": d, "n": n, "s_max": s_max})
    return out
