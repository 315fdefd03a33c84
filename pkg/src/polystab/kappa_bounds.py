"""Frequency windows, the resolvent constants M_R, M_0, M_C and the kappa bound.

For ``A = A_0 - D D*`` with ``A_0`` skew-adjoint, a lower bound
``||D* x|| >= eta(s) ||x||`` on the spectral windows ``(s - delta(s), s + delta(s))``
gives ``||R(is, A)|| <= M_R / (eta(s)^2 delta(s)^2)``.  An envelope
``eta^-2 delta^-2 <= M_0 (1 + |s|^alpha)`` then bounds
``sup_s ||R(is, A) A^{-ceil(alpha)}|| <= M_C`` and any ``kappa < 1/sqrt(2 M_C)``
is admissible in the perturbation theorems.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import golden_section, peak_aware_grid, refine_maximum, resolvent_operator
from .spectral_model import ModalBasis, ModalVector, inv_sqrt_norm, webster_basis

REFERENCE_S0 = 2.8

ANALYTIC_WEBSTER = "analytic-webster"
GAP_BASED = "gap-based"
USER_SUPPLIED = "user-supplied"


class WindowError(ValueError):
    """A frequency-window premise does not hold for the supplied data."""


@dataclass(frozen=True)
class FrequencyWindows:
    """Even window functions ``delta(s)`` and ``eta(s)`` with caps."""

    delta: Callable
    eta: Callable
    delta0: float
    eta0: float
    descriptor: str
    # windows are certified for |s| <= certified_to; beyond that eta is extrapolated
    certified_to: float = math.inf
    details: dict = field(default_factory=dict)

    def sample(self, s) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        return np.asarray(self.delta(s), dtype=float), np.asarray(self.eta(s), dtype=float)

    def to_dict(self) -> dict:
        out = {"descriptor": self.descriptor, "delta0": self.delta0, "eta0": self.eta0,
               "certified_to": None if math.isinf(self.certified_to) else self.certified_to}
        out.update({k: v for k, v in self.details.items() if _jsonable(v)})
        return out


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


# --- Webster example (a = 2, d(x) = 1 - x) ---------------------------------

def webster_damping_norm_sq(a: float) -> float:
    """``||1 - x||^2`` in ``L^2_a(0, 1)``, i.e. ``2 a^-3 (e^a - 1 - a - a^2/2)``."""
    if abs(a) < 1e-3:
        # series of the closed form; avoids cancellation near a = 0
        return 1 / 3 + a / 12 + a * a / 60 + a ** 3 / 360
    return 2.0 * (math.expm1(a) - a - a * a / 2.0) / a ** 3


def webster_damping_coefficient(n, a: float = 2.0):
    """Closed form of ``<phi_n, 1 - x>`` for the raw eigenfunctions ``e^{-ax/2} sin(pi n x)``."""
    n = np.asarray(n, dtype=float)
    lam = a * a / 4.0 + math.pi ** 2 * n ** 2
    sign = np.where(np.mod(n, 2) == 0, 1.0, -1.0)
    return (math.pi * n / lam
            - a * math.pi * n * (math.exp(a / 2.0) * sign - 1.0) / lam ** 2)


def webster_F(n):
    """Lower envelope F(n) for the a = 2 coefficients (squared inner denominator)."""
    n = np.asarray(n, dtype=float)
    lam = 1.0 + math.pi ** 2 * n ** 2
    sign = np.where(np.mod(n, 2) == 0, 1.0, -1.0)
    return math.pi * n / np.sqrt(lam) * (1.0 - 2.0 * (math.e * sign - 1.0) / lam ** 2)


def webster_G(n):
    n = np.asarray(n, dtype=float)
    lam = 1.0 + math.pi ** 2 * n ** 2
    return math.pi * n / np.sqrt(lam) * (1.0 - 2.0 * (math.e - 1.0) / lam ** 2)


def webster_c() -> float:
    """Golden decay constant ``c = min{F(1), G(2)}``."""
    return float(min(webster_F(1), webster_G(2)))


def webster_c_exact(n_max: int = 10_000) -> tuple[float, int]:
    """Smallest ``|lambda_n| |<phi_n, 1 - x>|`` using the quadrature-verified closed form.

    For even ``n`` both factors increase with ``n``; odd ``n`` exceed 0.95, so
    the scan over ``n <= n_max`` finds the global minimum.
    """
    n = np.arange(1, n_max + 1)
    vals = np.sqrt(1.0 + math.pi ** 2 * n ** 2) * np.abs(webster_damping_coefficient(n, 2.0))
    i = int(np.argmin(vals))
    return float(vals[i]), int(n[i])


def webster_windows(a: float = 2.0, basis: ModalBasis | None = None,
                    c: float | None = None) -> FrequencyWindows:
    """Windows ``delta = pi^2/(a + 3 pi)``, ``eta(s) = c/(|s| + delta_0)``.

    Only ``a = 2`` is supported analytically; other values must go through
    :func:`gap_windows`.  ``c`` defaults to the golden constant.
    """
    if a != 2:
        raise WindowError(f"analytic windows exist only for a=2 (got a={a}); use gap_windows")
    delta0 = math.pi ** 2 / (a + 3.0 * math.pi)
    c = webster_c() if c is None else float(c)
    if basis is not None:
        gap_floor = 3.0 * math.pi ** 2 / (2.0 + 3.0 * math.pi)
        freqs = np.sqrt(basis.eigenvalues)
        gaps = np.diff(np.concatenate([[-freqs[0]], freqs]))
        if gaps.min() < gap_floor:
            raise WindowError(f"eigenvalue gap {gaps.min():.6g} below {gap_floor:.6g}")
    return FrequencyWindows(
        delta=lambda s: np.full(np.shape(s), delta0),
        eta=lambda s: c / (np.abs(s) + delta0),
        delta0=delta0, eta0=c / delta0, descriptor=ANALYTIC_WEBSTER,
        details={"c": c, "a": a},
    )


def signed_frequencies(basis: ModalBasis, N: int | None = None) -> np.ndarray:
    r = np.sqrt(basis.eigenvalues[: N or basis.size])
    return np.concatenate([-r[::-1], r])


def gap_windows(basis: ModalBasis, modal_damping: ModalVector) -> FrequencyWindows:
    """Windows built from eigenvalue gaps and modal damping coefficients.

    ``delta`` is half the smallest gap between the frequencies
    ``sign(n) sqrt(mu_n)``.  On the window around ``sqrt(mu_n)``,
    ``eta = |<d, phi_n>| / sqrt(2)``; elsewhere (and beyond the truncation,
    where the value is not certified) ``eta`` follows ``c'/(|s| + delta_0)``
    with ``c' = min_n sqrt(mu_n) |<d, phi_n>| / sqrt(2)``.
    """
    g = modal_damping.as_normalized().coefficients
    N = g.size
    if N == 0:
        raise WindowError("modal damping has no coefficients")
    zero = np.flatnonzero(np.abs(g) == 0)
    if zero.size:
        raise WindowError(f"damping coefficient of mode {int(zero[0]) + 1} vanishes; "
                          "the window lower bound is zero there")
    freqs = signed_frequencies(basis, N)
    gaps = np.diff(freqs)
    if gaps.min() <= 0:
        raise WindowError("repeated eigenvalues: windows cannot isolate single modes")
    delta0 = 0.5 * float(gaps.min())
    root = np.sqrt(basis.eigenvalues[:N])
    level = np.abs(g) / math.sqrt(2.0)
    c_env = float(np.min(root * level))
    eta0 = float(max(level.max(), c_env / delta0))
    top = float(root[-1] + delta0)

    def eta(s):
        s_abs = np.abs(np.asarray(s, dtype=float))
        out = c_env / (s_abs + delta0)
        idx = np.clip(np.searchsorted(root, s_abs), 0, N - 1)
        for cand in (idx - 1, idx):
            cand = np.clip(cand, 0, N - 1)
            inside = np.abs(s_abs - root[cand]) < delta0
            out = np.where(inside, level[cand], out)
        return out

    # the Webster rule uses |<phi_n, d>| with raw phi_n; both agree iff raw_norm = 1/sqrt(2)
    example_rule = np.abs(g) * basis.raw_norm
    return FrequencyWindows(
        delta=lambda s: np.full(np.shape(s), delta0),
        eta=eta, delta0=delta0, eta0=eta0, descriptor=GAP_BASED, certified_to=top,
        details={"c_envelope": c_env, "modes": N,
                 "rule_disagreement": float(np.max(np.abs(example_rule - level)))},
    )


def user_windows(delta: Callable, eta: Callable, delta0: float, eta0: float) -> FrequencyWindows:
    return FrequencyWindows(delta=delta, eta=eta, delta0=float(delta0), eta0=float(eta0),
                            descriptor=USER_SUPPLIED)


def window_premise_report(windows: FrequencyWindows, basis: ModalBasis,
                          modal_damping: ModalVector, samples: int = 33) -> dict:
    """Check ``|D* psi_n| >= eta(s)`` across each window containing ``sqrt(mu_n)``.

    ``|D* psi_n| = |<d, phi_n>| / sqrt(2)`` for normalized ``phi_n``.  Returns
    the worst ratio (actual/required) and the offending mode; a ratio below 1
    means the window premise fails for that mode.
    """
    g = modal_damping.as_normalized().coefficients
    root = np.sqrt(basis.eigenvalues[: g.size])
    have = np.abs(g) / math.sqrt(2.0)
    worst, worst_mode = math.inf, None
    for n, (r, h) in enumerate(zip(root, have), start=1):
        d = float(windows.delta(np.array([r]))[0])
        s = np.linspace(r - d, r + d, samples)[1:-1]
        s = s[np.abs(s - r) < windows.delta(s)]
        need = float(np.max(windows.eta(s)))
        ratio = h / need
        if ratio < worst:
            worst, worst_mode = ratio, n
    return {"worst_ratio": float(worst), "worst_mode": worst_mode,
            "holds": bool(worst >= 1.0), "modes_checked": int(g.size)}


# --- constants -----------------------------------------------------------

def mr_constant(eta0: float, delta0: float, norm_D: float) -> float:
    if eta0 <= 0 or delta0 <= 0 or norm_D < 0:
        raise ValueError("need eta0 > 0, delta0 > 0, ||D|| >= 0")
    e2, d2, D2 = eta0 ** 2, delta0 ** 2, norm_D ** 2
    return 2.0 * math.sqrt(e2 * e2 * d2 + 2.0 * e2 * d2 * D2 + (d2 + e2 * D2 + 2.0 * D2 * D2) ** 2)


def m0_grid(windows: FrequencyWindows, alpha: float, s_grid) -> float:
    """Smallest ``M_0`` with ``eta^-2 delta^-2 <= M_0 (1 + |s|^alpha)`` on the grid."""
    s = np.asarray(s_grid, dtype=float)
    delta, eta = windows.sample(s)
    return float(np.max(1.0 / (eta ** 2 * delta ** 2 * (1.0 + np.abs(s) ** alpha))))


def m0_constant(windows: FrequencyWindows, alpha: float, s_max: float = 100.0,
                points: int = 10_001) -> float:
    """``M_0`` for the window envelope.

    Analytic Webster windows return ``2/(c^2 delta_0^2)`` (valid for
    ``alpha = 2``); other windows return the grid value over ``[0, s_max]``.
    """
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if windows.descriptor == ANALYTIC_WEBSTER and alpha == 2:
        c = windows.details["c"]
        return 2.0 / (c * c * windows.delta0 ** 2)
    return m0_grid(windows, alpha, np.linspace(0.0, s_max, points))


def mc_regimes(M_R: float, M_0: float, alpha: float, norm_Ainv: float,
               s0: float) -> tuple[float, float]:
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    n = math.ceil(alpha)
    grow = 1.0 + s0 ** alpha
    low = M_R * M_0 * norm_Ainv ** n * grow
    high = M_R * M_0 * grow / s0 ** n + sum(norm_Ainv ** k / s0 ** (n + 1 - k)
                                          for k in range(1, n + 1))
    return low, high


def mc_constant(M_R: float, M_0: float, alpha: float, norm_Ainv: float, s0: float) -> float:
    return max(mc_regimes(M_R, M_0, alpha, norm_Ainv, s0))


def kappa_from_mc(M_C: float) -> float:
    """Supremum of admissible kappa; admissible values are strictly smaller."""
    if M_C <= 0:
        raise ValueError("M_C must be positive")
    return 1.0 / math.sqrt(2.0 * M_C)


def optimize_s0(M_R: float, M_0: float, alpha: float, norm_Ainv: float,
                s_hi: float = 100.0, starts: int = 16) -> tuple[float, float]:
    """Minimize ``M_C(s0)`` over ``(0, s_hi]`` by multi-start golden-section."""
    f = lambda s0: mc_constant(M_R, M_0, alpha, norm_Ainv, s0)
    edges = np.geomspace(1e-3, s_hi, starts + 1)
    best = (REFERENCE_S0, f(REFERENCE_S0))
    for lo, hi in zip(edges[:-1], edges[1:]):
        s, v = golden_section(f, float(lo), float(hi), tol=1e-12)
        if v < best[1]:
            best = (s, v)
    return float(best[0]), float(best[1])


def norm_ainv_bound(basis: ModalBasis, modal_damping: ModalVector | None = None,
                    damping_norm_sq: float | None = None) -> float:
    """``(1 + ||d||^2 ||(-L)^{-1/2}||) ||(-L)^{-1/2}||`` for rank-one damping.

    ``||d||^2`` comes from ``damping_norm_sq`` when given, otherwise from the
    modal coefficients (a truncated Parseval sum).
    """
    r = inv_sqrt_norm(basis)
    if damping_norm_sq is None:
        if modal_damping is None:
            damping_norm_sq = 0.0
        else:
            damping_norm_sq = float(np.sum(np.abs(modal_damping.as_normalized().coefficients) ** 2))
    return (1.0 + damping_norm_sq * r) * r


def estimate_kappa_numeric(A_N, n: int, s_grid, include_peaks: bool = True,
                           refine: bool = True, threads: int | None = None) -> float:
    """``1/sqrt(2 max_s ||R(is, A_N) A_N^{-n}||)`` on a grid.  Not a certificate.

    ``A_N`` is a matrix or a truncated system (whose low-rank structure, if
    any, speeds up the sweep).
    """
    return resolvent_sup(A_N, n, s_grid, include_peaks, refine, threads)["kappa"]


def resolvent_sup(A_N, n: int, s_grid, include_peaks: bool = True,
                  refine: bool = True, threads: int | None = None) -> dict:
    if n not in (1, 2):
        raise ValueError("n = beta + gamma must be 1 or 2")
    op = resolvent_operator(A_N, n)
    A = np.asarray(getattr(A_N, "A", A_N))
    grid = peak_aware_grid(A, s_grid) if include_peaks else np.asarray(s_grid, dtype=float)
    values = op.sweep(grid, threads)
    if refine:
        s_star, sup = refine_maximum(op.norm, grid, values)
    else:
        i = int(np.argmax(values))
        s_star, sup = float(grid[i]), float(values[i])
    return {"kappa": kappa_from_mc(sup), "sup": sup, "s_at_sup": s_star,
            "grid_points": int(grid.size), "certified": False}


# --- certificate -----------------------------------------------------------

@dataclass(frozen=True)
class KappaCertificate:
    M_R: float
    M_0: float
    s0: float
    M_C: float
    kappa_max: float
    alpha: float
    n_alpha: int
    norm_D: float
    norm_Ainv_bound: float
    windows: dict
    regimes: tuple[float, float]
    s0_source: str = "fixed"
    provenance: dict = field(default_factory=dict)

    def recompute_mc(self) -> float:
        return mc_constant(self.M_R, self.M_0, self.alpha, self.norm_Ainv_bound, self.s0)

    def to_dict(self) -> dict:
        prov = self.provenance

        def entry(name, value):
            return {"value": value, "formula": prov.get(name, "")}

        return {
            "kind": "KappaCertificate",
            "alpha": self.alpha,
            "n_alpha": self.n_alpha,
            "constants": {
                "M_R": entry("M_R", self.M_R),
                "M_0": entry("M_0", self.M_0),
                "s0": entry("s0", self.s0),
                "M_C": entry("M_C", self.M_C),
                "kappa_max": entry("kappa_max", self.kappa_max),
                "norm_D": entry("norm_D", self.norm_D),
                "norm_Ainv_bound": entry("norm_Ainv_bound", self.norm_Ainv_bound),
                "M_C_low_regime": entry("M_C_low_regime", self.regimes[0]),
                "M_C_high_regime": entry("M_C_high_regime", self.regimes[1]),
            },
            "s0_source": self.s0_source,
            "windows": self.windows,
            "admissible": "kappa < kappa_max (strict)",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


_FORMULAS = {
    "M_R": "2*sqrt(eta0^4 delta0^2 + 2 eta0^2 delta0^2 |D|^2 + (delta0^2 + eta0^2 |D|^2 + 2|D|^4)^2)",
    "M_0": "sup_s eta(s)^-2 delta(s)^-2 / (1 + |s|^alpha)",
    "M_C": "max{M_R M_0 |A^-1|^n (1+s0^a), M_R M_0 (1+s0^a)/s0^n + sum_k |A^-1|^k / s0^(n+1-k)}",
    "kappa_max": "1/sqrt(2 M_C)",
    "norm_Ainv_bound": "(1 + |d|^2 mu_1^-1/2) mu_1^-1/2",
    "M_C_low_regime": "M_R M_0 |A^-1|^n (1+s0^a)",
    "M_C_high_regime": "M_R M_0 (1+s0^a)/s0^n + sum_k |A^-1|^k / s0^(n+1-k)",
}


def certify(windows: FrequencyWindows, norm_D: float, norm_Ainv: float, alpha: float,
            s0: float | None = REFERENCE_S0, optimize: bool = False,
            M_0: float | None = None) -> KappaCertificate:
    """Run the full constant chain for given windows and operator norms."""
    M_R = mr_constant(windows.eta0, windows.delta0, norm_D)
    if M_0 is None:
        M_0 = m0_constant(windows, alpha)
    source = "fixed"
    if optimize:
        s0, _ = optimize_s0(M_R, M_0, alpha, norm_Ainv)
        source = "optimized"
    elif s0 is None:
        s0 = REFERENCE_S0
    elif s0 != REFERENCE_S0:
        source = "user"
    regimes = mc_regimes(M_R, M_0, alpha, norm_Ainv, s0)
    M_C = max(regimes)
    prov = dict(_FORMULAS)
    prov["s0"] = {"fixed": "fixed s0 = 2.8", "optimized": "multi-start golden-section",
                  "user": "user supplied"}[source]
    prov["norm_D"] = "||D_0|| = ||d|| in the weighted L2 norm"
    if windows.descriptor == ANALYTIC_WEBSTER:
        prov["M_0"] = "2/(c^2 delta0^2)"
    return KappaCertificate(
        M_R=M_R, M_0=M_0, s0=float(s0), M_C=M_C, kappa_max=kappa_from_mc(M_C),
        alpha=float(alpha), n_alpha=math.ceil(alpha), norm_D=float(norm_D),
        norm_Ainv_bound=float(norm_Ainv), windows=windows.to_dict(), regimes=regimes,
        s0_source=source, provenance=prov,
    )


def webster_certificate(s0: float | None = REFERENCE_S0, optimize: bool = False,
                        c: float | None = None) -> KappaCertificate:
    """The a = 2, d(x) = 1 - x pipeline with analytic windows."""
    a = 2.0
    windows = webster_windows(a, webster_basis(a, 200), c=c)
    d2 = webster_damping_norm_sq(a)
    basis = webster_basis(a, 1)
    return certify(windows, math.sqrt(d2), norm_ainv_bound(basis, damping_norm_sq=d2),
                   alpha=2.0, s0=s0, optimize=optimize)
