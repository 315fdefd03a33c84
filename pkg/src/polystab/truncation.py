"""Galerkin truncations of damped wave systems used as an empirical oracle.

States live in energy coordinates ``y = (sqrt(mu) * q, p)`` where ``q`` and
``p`` are the modal coefficients of position and velocity, so the Euclidean
norm of ``y`` equals the energy norm of the state.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .linalg import local_maxima, loglog_fit, peak_aware_grid, resolvent_operator
from .perturbation_check import Perturbation
from .spectral_model import ModalBasis, ModalVector

DAMPING_TOL = 1e-10
SKEW_TOL = 1e-13


class AssemblyError(ValueError):
    pass


class IntegratorError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Viscous:
    """Pointwise damping ``d(x) w_t``."""

    d: Callable
    quad_nodes: int | None = None


@dataclass(frozen=True)
class WeakRankOne:
    """Rank-one damping ``d <w_t, d>``."""

    d: ModalVector


@dataclass(frozen=True)
class TruncatedSystem:
    A: np.ndarray
    N: int
    basis: ModalBasis | None = None
    alpha: float = 2.0
    A0: np.ndarray | None = None
    G: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    # (U, V) with A = A0 + U V^H when the damping and perturbation have low rank
    low_rank: tuple | None = None
    label: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def skew_error(self) -> float:
        if self.A0 is None:
            return float("nan")
        return float(np.max(np.abs(self.A0 + self.A0.T)))

    def symmetric_part_max_eig(self) -> float:
        """Largest eigenvalue of ``(A + A^H)/2``; nonpositive for dissipative systems."""
        S = 0.5 * (self.A + self.A.conj().T)
        return float(np.linalg.eigvalsh(S)[-1])

    def inverse_norm(self) -> float:
        return float(1.0 / sla.svdvals(self.A)[-1])


def wave_skew_block(mu: np.ndarray) -> np.ndarray:
    n = mu.size
    r = np.sqrt(mu)
    A0 = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    A0[idx, n + idx] = r
    A0[n + idx, idx] = -r
    return A0


def assemble_wave(basis: ModalBasis, damping=None, N: int | None = None,
                  alpha: float = 2.0) -> TruncatedSystem:
    """Generator ``A_0 - D D*`` restricted to the first ``N`` modes."""
    N = basis.size if N is None else N
    if not 1 <= N <= basis.size:
        raise AssemblyError(f"N={N} exceeds basis size {basis.size}")
    mu = basis.eigenvalues[:N]
    A0 = wave_skew_block(mu)
    low_rank = None
    if damping is None:
        G = np.zeros((N, N))
        low_rank = (np.zeros((2 * N, 1)), np.zeros((2 * N, 1)))
    elif isinstance(damping, WeakRankOne):
        g = damping.d.padded(N)
        G = np.outer(g, g.conj())
        Dm = np.zeros((2 * N, 1), dtype=g.dtype)
        Dm[N:, 0] = g
        low_rank = (Dm, -Dm)
    elif isinstance(damping, Viscous):
        if not basis.has_evaluator:
            raise AssemblyError("viscous damping needs pointwise eigenfunctions")
        coords, w = basis.quadrature(damping.quad_nodes or basis.default_nodes(N))
        dv = np.broadcast_to(np.asarray(damping.d(*coords), dtype=float), w.shape)
        phi = np.array([basis.eigenfunction(i, *coords) for i in range(N)])
        G = (phi * (w * dv)) @ phi.T
        G = 0.5 * (G + G.T)
    else:
        raise AssemblyError(f"unsupported damping {type(damping).__name__}")
    lo = float(np.linalg.eigvalsh(G)[0]) if N else 0.0
    if lo < -DAMPING_TOL:
        raise AssemblyError(f"damping block has eigenvalue {lo:.3e} < 0 (not dissipative)")
    A = A0.astype(G.dtype, copy=True)
    A[N:, N:] -= G
    return TruncatedSystem(A=A, N=N, basis=basis, alpha=alpha, A0=A0, G=G, low_rank=low_rank,
                           label=f"{basis.family} N={N}", notes={"damping_min_eig": lo})


def _same_basis(a: ModalBasis, b: ModalBasis, N: int) -> bool:
    if a is b:
        return True
    n = min(N, a.size, b.size)
    return (a.family == b.family and a.params == b.params
            and np.array_equal(a.eigenvalues[:n], b.eigenvalues[:n]))


def perturbation_matrices(sys: TruncatedSystem, p: Perturbation) -> tuple[np.ndarray, np.ndarray]:
    """``B_N`` (2N x m) and ``C_N`` (m x 2N) in energy coordinates.

    ``C_1 w = <w, c_1>`` acts on position coefficients ``q = y_1 / sqrt(mu)``,
    hence the ``mu^{-1/2}`` factor on the first block of ``C_N``.
    """
    N, m = sys.N, p.m
    for v in (*p.b, *p.c1, *p.c2):
        if v is not None and not _same_basis(v.basis, sys.basis, N):
            raise AssemblyError("perturbation vector expressed in a different basis")
    vecs = [v for v in (*p.b, *p.c1, *p.c2) if v is not None]
    dtype = np.result_type(float, *[v.coefficients.dtype for v in vecs]) if vecs else float
    B = np.zeros((2 * N, m), dtype=dtype)
    C = np.zeros((m, 2 * N), dtype=dtype)
    inv_r = 1.0 / np.sqrt(sys.basis.eigenvalues[:N])
    for k in range(m):
        B[N:, k] = p.b[k].padded(N)
        if p.c1[k] is not None:
            C[k, :N] = inv_r * p.c1[k].padded(N).conj()
        if p.c2[k] is not None:
            C[k, N:] = p.c2[k].padded(N).conj()
    return B, C


def assemble_perturbed(sys: TruncatedSystem, p: Perturbation | None = None,
                       B: np.ndarray | None = None, C: np.ndarray | None = None) -> TruncatedSystem:
    """``A_N + B_N C_N`` from modal data or from explicit matrices."""
    if p is not None:
        B, C = perturbation_matrices(sys, p)
    if B is None or C is None:
        raise AssemblyError("need a Perturbation or both B and C")
    BC = B @ C
    A = sys.A.copy() if not np.any(BC) else sys.A + BC
    notes = dict(sys.notes, C1_scaling="mu^-1/2 on position coordinates")
    low_rank = None
    if sys.low_rank is not None:
        low_rank = (np.hstack([sys.low_rank[0], B]), np.hstack([sys.low_rank[1], C.conj().T]))
    return TruncatedSystem(A=A, N=sys.N, basis=sys.basis, alpha=sys.alpha, A0=sys.A0,
                           G=sys.G, B=B, C=C, low_rank=low_rank, label=sys.label + " perturbed", notes=notes)


# --- resolvent ---------------------------------------------------------------

@dataclass(frozen=True)
class ResolventProfile:
    s: np.ndarray
    values: np.ndarray
    n: int
    exponent: float
    stderr: float
    fit_points: int
    fit_range: tuple[float, float]

    @property
    def band(self) -> tuple[float, float]:
        return self.exponent - 2 * self.stderr, self.exponent + 2 * self.stderr

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "norm"])
        for s, v in zip(self.s, self.values):
            w.writerow([repr(float(s)), repr(float(v))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"n": self.n, "exponent": self.exponent, "stderr": self.stderr,
                "band": list(self.band), "fit_points": self.fit_points,
                "fit_range": list(self.fit_range), "grid_points": int(self.s.size),
                "max": float(self.values.max()), "certified": False}


def growth_exponent(s: np.ndarray, values: np.ndarray) -> tuple[float, float, int, tuple]:
    """Log-log slope over the upper half of the grid, using local maxima when there are enough."""
    lo, hi = float(s.min()), float(s.max())
    mid = 0.5 * (lo + hi)
    upper = s >= mid
    su, vu = s[upper], values[upper]
    peaks = local_maxima(vu)
    if peaks.size >= 3:
        su, vu = su[peaks], vu[peaks]
    if np.count_nonzero(su > 0) < 2:
        return math.nan, math.nan, int(su.size), (mid, hi)
    slope, se = loglog_fit(su, vu)
    return slope, se, int(su.size), (mid, hi)


def resolvent_sweep(sys: TruncatedSystem | np.ndarray, s_grid: Sequence[float], n: int = 0,
                    include_peaks: bool = True, threads: int | None = None,
                    fast: bool = True) -> ResolventProfile:
    """``||R(is, A_N) A_N^{-n}||`` on the grid (plus the eigenfrequencies inside it)."""
    A = sys.A if isinstance(sys, TruncatedSystem) else np.asarray(sys)
    grid = np.asarray(s_grid, dtype=float)
    if include_peaks:
        grid = peak_aware_grid(A, grid)
    op = resolvent_operator(sys, n, fast)
    vals = op.sweep(grid, threads)
    slope, se, k, rng = growth_exponent(grid, vals)
    return ResolventProfile(grid, vals, n, slope, se, k, rng)


def spectrum_check(sys: TruncatedSystem | np.ndarray) -> dict:
    """Hurwitz test with a rounding allowance of ``64 eps ||A||_2``."""
    A = sys.A if isinstance(sys, TruncatedSystem) else np.asarray(sys)
    ev = np.linalg.eigvals(A)
    max_re = float(ev.real.max())
    tol = 64 * np.finfo(float).eps * float(np.linalg.norm(A, 2))
    return {"pass": bool(max_re < -tol), "max_real": max_re, "margin": -max_re,
            "tolerance": tol, "eigenvalues": ev}


# --- decay -------------------------------------------------------------------

@dataclass(frozen=True)
class DecayTrace:
    t: np.ndarray
    energy: np.ndarray
    slope: float
    stderr: float
    fit_window: tuple[float, float]
    dt: float
    seed: int
    profile: str
    smoothness: int
    dt_history: tuple = ()
    max_increase: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "energy"])
        for t, e in zip(self.t, self.energy):
            w.writerow([repr(float(t)), repr(float(e))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "fit_window": list(self.fit_window),
                "dt": self.dt, "seed": self.seed, "profile": self.profile,
                "smoothness": self.smoothness, "dt_history": [list(h) for h in self.dt_history],
                "max_relative_increase": self.max_increase, "certified": False}


def initial_profile(A: np.ndarray, rng: np.random.Generator, profile: str = "critical") -> np.ndarray:
    """Unit vector ``v`` for ``u_0 = A^{-k} v``.

    ``random`` draws iid Gaussian entries.  ``critical`` spreads energy over the
    eigenvectors ``x_j`` of the skew part, with amplitudes ``(1 + |omega_j|)^{-1/2}``
    and random phases: the borderline profile whose smoothed energy sees
    the full polynomial rate.
    """
    n = A.shape[0]
    if profile == "random":
        v = rng.standard_normal(n)
    elif profile == "critical":
        S = 0.5 * (A - A.conj().T)
        omega, X = np.linalg.eigh(1j * S)
        amp = (1.0 + np.abs(omega)) ** -0.5 * np.exp(2j * math.pi * rng.random(n))
        if np.isrealobj(A):
            # conjugate pairs +-omega: keep one of each so every mode gets a fixed modulus
            tiny = 1e-12 * max(1.0, float(np.abs(omega).max()))
            amp = np.where(omega > tiny, amp, np.where(np.abs(omega) <= tiny, amp, 0.0))
            v = (X @ amp).real
        else:
            v = X @ amp
    else:
        raise ValueError(f"unknown initial profile {profile!r}")
    return v / np.linalg.norm(v)


def checkpoint_times(t_max: float, steps: int) -> np.ndarray:
    start = min(1.0, t_max / 1000.0)
    return np.concatenate([[0.0], np.geomspace(start, t_max, steps)])


def _trapezoid_energies(A: np.ndarray, u0: np.ndarray, ks: np.ndarray, dt: float) -> np.ndarray:
    """Energies at step counts ``ks`` for the Cayley propagator, advanced by binary powers."""
    I = np.eye(A.shape[0])
    P = sla.solve(I - 0.5 * dt * A, I + 0.5 * dt * A)
    top = int(ks.max()).bit_length()
    powers = [P]
    for _ in range(top):
        powers.append(powers[-1] @ powers[-1])
    out = np.empty(ks.size)
    u, k_now = u0.copy(), 0
    for i, k in enumerate(ks):
        step = int(k) - k_now
        j = 0
        while step:
            if step & 1:
                u = powers[j] @ u
            step >>= 1
            j += 1
        k_now = int(k)
        out[i] = float(np.vdot(u, u).real)
    return out


def simulate_decay(sys: TruncatedSystem | np.ndarray, smoothness: int = 1, t_max: float = 1000.0,
                   steps: int = 200, seed: int = 0, profile: str = "critical",
                   dt: float = 0.04, rtol: float = 0.005, max_halvings: int = 10) -> DecayTrace:
    """Trapezoidal trajectory ``||u(t)||^2`` from ``u_0 = A^{-smoothness} v``.

    ``dt`` is halved until the final energy changes by less than ``rtol``.
    """
    if smoothness < 1:
        raise ValueError("smoothness must be >= 1")
    A = sys.A if isinstance(sys, TruncatedSystem) else np.asarray(sys)
    rng = np.random.default_rng(seed)
    v = initial_profile(A, rng, profile)
    u0 = v
    for _ in range(smoothness):
        u0 = np.linalg.solve(A, u0)
    times = checkpoint_times(t_max, steps)
    history = []
    prev = None
    for _ in range(max_halvings + 1):
        ks = np.round(times / dt).astype(np.int64)
        ks = np.maximum.accumulate(ks)
        E = _trapezoid_energies(A, u0, ks, dt)
        history.append((dt, float(E[-1])))
        if prev is not None and abs(E[-1] - prev[-1]) <= rtol * abs(E[-1]):
            break
        prev = E
        dt /= 2.0
    else:
        raise IntegratorError(f"final energy did not settle to {rtol} after {max_halvings} halvings")
    t_used = ks * dt
    lo = t_max / 100.0
    keep = t_used >= lo
    slope, se = loglog_fit(t_used[keep], E[keep])
    inc = np.diff(E) / np.maximum(E[:-1], np.finfo(float).tiny)
    return DecayTrace(t=t_used, energy=E, slope=slope, stderr=se, fit_window=(lo, t_max),
                      dt=dt, seed=seed, profile=profile, smoothness=smoothness,
                      dt_history=tuple(history), max_increase=float(max(0.0, inc.max())))


def decay_envelope(sys: TruncatedSystem | np.ndarray, times: Sequence[float],
                   smoothness: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Worst-case ``||T(t) A^{-smoothness}||^2`` and its log-log slope over the upper decades."""
    A = sys.A if isinstance(sys, TruncatedSystem) else np.asarray(sys)
    times = np.asarray(times, dtype=float)
    lam, V = np.linalg.eig(A)
    use_eig = np.linalg.cond(V) < 1e10
    if use_eig:
        Vinv = np.linalg.inv(V)
        W = lam ** (-smoothness)
    else:
        Ak = np.linalg.matrix_power(np.linalg.inv(A), smoothness)
    out = np.empty(times.size)
    for i, t in enumerate(times):
        if use_eig:
            M = (V * (np.exp(lam * t) * W)) @ Vinv
        else:
            M = sla.expm(A * t) @ Ak
        out[i] = sla.svdvals(M)[0] ** 2
    return times, out
