"""Resolvent-norm kernels shared by the certificate and truncation modules."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

DENSE_SVD_LIMIT = 1024
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class SingularResolventError(ArithmeticError):
    """``is - A`` is numerically singular at a sampled frequency."""

    def __init__(self, s: float, sigma: float):
        super().__init__(f"is - A is singular at s={s!r} (sigma_min={sigma:.3e})")
        self.s = s
        self.sigma = sigma


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYSTAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Map preserving input order; numpy releases the GIL inside LAPACK."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sigma_min(M: np.ndarray) -> float:
    if M.shape[0] <= DENSE_SVD_LIMIT:
        return float(sla.svdvals(M, check_finite=False)[-1])
    return _sigma_min_inverse_iteration(M)


def _sigma_min_inverse_iteration(M: np.ndarray, tol: float = 1e-12, maxiter: int = 200) -> float:
    lu = sla.lu_factor(M, check_finite=False)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        y = sla.lu_solve(lu, x, trans=0, check_finite=False)
        z = sla.lu_solve(lu, y, trans=2, check_finite=False)
        new = np.linalg.norm(z)
        x = z / new
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(1.0 / math.sqrt(est))


class ResolventOperator:
    """Evaluates ``||R(is, A) A^{-n}||`` as ``1/sigma_min(A^n (is - A))``."""

    def __init__(self, A: np.ndarray, n: int = 0):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if n < 0:
            raise ValueError("n must be >= 0")
        self.A = A
        self.n = n
        self.An = np.linalg.matrix_power(A, n) if n else np.eye(A.shape[0])
        self.An1 = self.An @ A
        self._scale_n = np.linalg.norm(self.An)
        self._scale_n1 = np.linalg.norm(self.An1)

    def sigma(self, s: float) -> float:
        M = (1j * s) * self.An - self.An1
        sig = sigma_min(M)
        floor = 64 * np.finfo(float).eps * (abs(s) * self._scale_n + self._scale_n1)
        if not np.isfinite(sig) or sig <= floor:
            raise SingularResolventError(float(s), sig)
        return sig

    def norm(self, s: float) -> float:
        return 1.0 / self.sigma(s)

    def sweep(self, s_grid: Iterable[float], threads: int | None = None) -> np.ndarray:
        return np.array(parallel_map(self.norm, list(s_grid), threads))


class _DiagLowRankSolver:
    """Solves with ``diag(d) + U V^H`` and its adjoint by the Woodbury identity."""

    def __init__(self, d: np.ndarray, U: np.ndarray, V: np.ndarray):
        self.d = d
        r = U.shape[1]
        self.U, self.V = U, V
        self.DiU = U / d[:, None]
        self.cap = np.linalg.inv(np.eye(r) + V.conj().T @ self.DiU)
        self.DiV = V / d.conj()[:, None]
        self.cap_adj = np.linalg.inv(np.eye(r) + U.conj().T @ self.DiV)

    def solve(self, x):
        y = x / self.d
        return y - self.DiU @ (self.cap @ (self.V.conj().T @ y))

    def solve_adjoint(self, x):
        y = x / self.d.conj()
        return y - self.DiV @ (self.cap_adj @ (self.U.conj().T @ y))


class LowRankResolventOperator:
    """``||R(is, A) A^{-n}||`` for ``A = A_0 + U V^H`` with ``A_0`` normal.

    In the eigenbasis of ``A_0`` both ``A`` and ``is - A`` are diagonal plus
    rank ``r``, so each Lanczos step on ``K^H K`` costs ``O(dim * r)``.  Points
    where ``is`` sits on an eigenvalue of ``A_0`` fall back to the dense
    evaluation.
    """

    def __init__(self, A: np.ndarray, A0: np.ndarray, U: np.ndarray, V: np.ndarray,
                 n: int = 0, tol: float = 1e-12):
        A0 = np.asarray(A0)
        omega, W = np.linalg.eigh(0.5j * (A0 - A0.conj().T))
        herm = 0.5 * (A0 + A0.conj().T)
        if np.max(np.abs(herm)) > 0:
            raise ValueError("A0 must be skew-adjoint for the low-rank path")
        self.lam = -1j * omega
        self.U = W.conj().T @ U
        self.V = W.conj().T @ V
        self.n = n
        self.tol = tol
        self.dim = A0.shape[0]
        self.dense = ResolventOperator(A, n)
        self._A = _DiagLowRankSolver(self.lam, self.U, self.V) if n else None
        self._scale = max(1.0, float(np.abs(self.lam).max()))

    def norm(self, s: float) -> float:
        d = 1j * s - self.lam
        if np.min(np.abs(d)) < 1e-12 * self._scale:
            return self.dense.norm(s)
        R = _DiagLowRankSolver(d, -self.U, self.V)
        cond = np.linalg.cond(R.cap)
        if not np.isfinite(cond) or cond > 1e12:
            return self.dense.norm(s)
        An = self._A

        def mv(x):
            y = x
            for _ in range(self.n):
                y = An.solve(y)
            y = R.solve_adjoint(R.solve(y))
            for _ in range(self.n):
                y = An.solve_adjoint(y)
            return y

        op = LinearOperator((self.dim, self.dim), matvec=mv, dtype=complex)
        try:
            ev = eigsh(op, k=1, which="LA", tol=self.tol, ncv=min(self.dim, 24),
                       v0=np.ones(self.dim, dtype=complex), return_eigenvectors=False)
        except (ArpackError, ArpackNoConvergence):
            return self.dense.norm(s)
        return float(math.sqrt(ev[0].real))

    def sweep(self, s_grid: Iterable[float], threads: int | None = None) -> np.ndarray:
        return np.array(parallel_map(self.norm, list(s_grid), threads))


def resolvent_operator(system, n: int = 0, fast: bool = True):
    """Best available evaluator for a matrix or a system with ``A``, ``A0``, ``low_rank``."""
    A = getattr(system, "A", system)
    lr = getattr(system, "low_rank", None)
    if fast and lr is not None and getattr(system, "A0", None) is not None:
        return LowRankResolventOperator(A, system.A0, lr[0], lr[1], n)
    return ResolventOperator(np.asarray(A), n)


def peak_frequencies(A: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Imaginary parts of eigenvalues of ``A`` inside [lo, hi]."""
    ev = np.linalg.eigvals(A)
    im = np.unique(np.round(np.abs(ev.imag), 14))
    return im[(im >= lo) & (im <= hi)]


def peak_aware_grid(A: np.ndarray, s_grid: Sequence[float]) -> np.ndarray:
    s_grid = np.asarray(s_grid, dtype=float)
    peaks = peak_frequencies(A, s_grid.min(), s_grid.max())
    return np.unique(np.concatenate([s_grid, peaks]))


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-10, maxiter: int = 200) -> tuple[float, float]:
    """Minimize ``f`` on [lo, hi]; returns (argmin, min) including the endpoints."""
    a, b = lo, hi
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = f(x2)
    best = min(((x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))), key=lambda p: p[1])
    return best


def refine_maximum(f: Callable[[float], float], grid: np.ndarray, values: np.ndarray,
                   top: int = 3) -> tuple[float, float]:
    """Polish the largest grid samples with golden-section on neighbouring cells."""
    order = np.argsort(values)[::-1][:top]
    best_s, best_v = float(grid[order[0]]), float(values[order[0]])
    for i in order:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        if hi <= lo:
            continue
        s, negv = golden_section(lambda x: -f(x), float(lo), float(hi), tol=1e-9)
        if -negv > best_v:
            best_s, best_v = s, -negv
    return best_s, best_v


def loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log y against log x and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2:
        raise ValueError("need at least two positive samples for a log-log fit")
    X = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    if lx.size > 2:
        resid = ly - X @ coef
        s2 = resid @ resid / (lx.size - 2)
        se = math.sqrt(s2 / np.sum((lx - lx.mean()) ** 2))
    else:
        se = 0.0
    return float(coef[0]), se


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of interior local maxima (plateaus count once)."""
    v = np.asarray(values)
    if v.size < 3:
        return np.arange(v.size)
    idx = [i for i in range(1, v.size - 1) if v[i] >= v[i - 1] and v[i] > v[i + 1]]
    return np.array(idx, dtype=int)
