"""Modal representation of diagonalizable negative operators ``L``.

A :class:`ModalBasis` carries the eigenvalues ``mu_n`` of ``-L`` (ascending,
positive) together with pointwise eigenfunction evaluators for the closed-form
families used in the package: the Webster operator ``d^2/dx^2 + a d/dx`` on
``L^2_a(0, 1)`` and the Dirichlet Laplacian on a rectangle.  A ``custom``
basis holds eigenvalues only and supports purely modal work.

Fractional norms follow ``||u||_theta = (sum mu_n^(2 theta) |u_n|^2)^(1/2)``
over coefficients against the *normalized* eigenfunctions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

WEBSTER = "webster"
RECTANGLE = "rectangle"
CUSTOM = "custom"

_PANEL_NODES = 16


class BasisError(ValueError):
    """Raised for operations a basis cannot support or invalid basis data."""


def gauss_legendre(lo: float, hi: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with at least ``nodes`` points on [lo, hi]."""
    panels = max(1, math.ceil(nodes / _PANEL_NODES))
    x, w = np.polynomial.legendre.leggauss(_PANEL_NODES)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


@dataclass(frozen=True)
class ModalBasis:
    family: str
    params: dict
    eigenvalues: np.ndarray
    modes: tuple = ()
    # weighted norm of the stored (raw) eigenfunction; 1 when already normalized
    raw_norm: float = 1.0

    def __post_init__(self):
        mu = np.asarray(self.eigenvalues, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise BasisError("basis needs at least one eigenvalue")
        if not np.all(np.isfinite(mu)) or mu[0] <= 0:
            raise BasisError("eigenvalues of -L must be finite and positive")
        if np.any(np.diff(mu) < 0):
            raise BasisError("eigenvalues must be sorted ascending")
        mu.setflags(write=False)
        object.__setattr__(self, "eigenvalues", mu)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def dim(self) -> int:
        return 2 if self.family == RECTANGLE else 1

    @property
    def has_evaluator(self) -> bool:
        return self.family in (WEBSTER, RECTANGLE)

    @property
    def domain(self) -> tuple[tuple[float, float], ...]:
        if self.family == WEBSTER:
            return ((0.0, 1.0),)
        if self.family == RECTANGLE:
            return ((0.0, self.params["a"]), (0.0, self.params["b"]))
        raise BasisError("custom basis has no spatial domain")

    def truncate(self, n: int) -> "ModalBasis":
        if not 1 <= n <= self.size:
            raise BasisError(f"cannot truncate a {self.size}-mode basis to {n}")
        return ModalBasis(self.family, dict(self.params), self.eigenvalues[:n],
                          tuple(self.modes[:n]), self.raw_norm)

    def weight(self, *coords):
        """Density of the inner-product measure."""
        if self.family == WEBSTER:
            return np.exp(self.params["a"] * np.asarray(coords[0]))
        return np.ones(np.broadcast(*coords).shape)

    def eigenfunction(self, i: int, *coords, normalized: bool = True):
        """Evaluate the ``i``-th (0-based) eigenfunction at the given points."""
        if not self.has_evaluator:
            raise BasisError("custom basis carries no eigenfunction evaluator")
        if self.family == WEBSTER:
            (n,) = self.modes[i]
            x = np.asarray(coords[0], dtype=float)
            raw = np.exp(-0.5 * self.params["a"] * x) * np.sin(math.pi * n * x)
            return raw / self.raw_norm if normalized else raw
        j, k = self.modes[i]
        a, b = self.params["a"], self.params["b"]
        x = np.asarray(coords[0], dtype=float)
        y = np.asarray(coords[1], dtype=float)
        return (2.0 / math.sqrt(a * b)) * np.sin(j * math.pi * x / a) * np.sin(k * math.pi * y / b)

    def quadrature(self, nodes: int):
        """Nodes and weights (with the measure density folded in) on the domain."""
        if self.family == WEBSTER:
            x, w = gauss_legendre(0.0, 1.0, nodes)
            return (x,), w * self.weight(x)
        if self.family == RECTANGLE:
            a, b = self.params["a"], self.params["b"]
            x, wx = gauss_legendre(0.0, a, nodes)
            y, wy = gauss_legendre(0.0, b, nodes)
            X, Y = np.meshgrid(x, y, indexing="ij")
            return (X.ravel(), Y.ravel()), np.outer(wx, wy).ravel()
        raise BasisError("custom basis has no quadrature")

    def default_nodes(self, n_modes: int | None = None) -> int:
        n_modes = self.size if n_modes is None else n_modes
        if self.family == RECTANGLE:
            top = max(max(jk) for jk in self.modes[:n_modes])
            return max(64, 8 * top)
        return max(64, 8 * n_modes)

    def gram(self, k: int = 20, nodes: int | None = None) -> np.ndarray:
        """Quadrature Gram matrix of the first ``k`` normalized eigenfunctions."""
        k = min(k, self.size)
        coords, w = self.quadrature(nodes or self.default_nodes(k))
        phi = np.array([self.eigenfunction(i, *coords) for i in range(k)])
        return (phi * w) @ phi.T

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params),
                "eigenvalues": self.eigenvalues.tolist()}


def webster_basis(a: float, N: int) -> ModalBasis:
    """Eigenpairs ``a^2/4 + pi^2 n^2``, ``e^{-ax/2} sin(pi n x)`` of the Webster operator."""
    if a < 0:
        raise BasisError("Webster parameter a must be >= 0")
    if N < 1:
        raise BasisError("N must be >= 1")
    n = np.arange(1, N + 1)
    mu = a * a / 4.0 + math.pi ** 2 * n.astype(float) ** 2
    return ModalBasis(WEBSTER, {"a": float(a)}, mu, tuple((int(k),) for k in n),
                      raw_norm=1.0 / math.sqrt(2.0))


def rectangle_basis(a: float, b: float, N: int) -> ModalBasis:
    """First ``N`` Dirichlet-Laplacian eigenpairs on (0, a) x (0, b).

    Ties are broken lexicographically in (j, k).
    """
    if a <= 0 or b <= 0:
        raise BasisError("rectangle sides must be positive")
    if N < 1:
        raise BasisError("N must be >= 1")
    j = np.arange(1, N + 1)
    J, K = np.meshgrid(j, j, indexing="ij")
    J, K = J.ravel(), K.ravel()
    lam = J.astype(float) ** 2 / a ** 2 + K.astype(float) ** 2 / b ** 2
    order = np.lexsort((K, J, lam))[:N]
    mu = math.pi ** 2 * lam[order]
    modes = tuple((int(J[i]), int(K[i])) for i in order)
    return ModalBasis(RECTANGLE, {"a": float(a), "b": float(b)}, mu, modes)


def custom_basis(eigenvalues: Sequence[float]) -> ModalBasis:
    mu = np.asarray(eigenvalues, dtype=float)
    return ModalBasis(CUSTOM, {}, mu, tuple((i + 1,) for i in range(mu.size)))


@dataclass(frozen=True)
class ModalVector:
    """Coefficients of a function against a basis; entries past ``N`` are zero."""

    basis: ModalBasis
    coefficients: np.ndarray
    normalized: bool = True
    note: str = ""

    def __post_init__(self):
        c = np.array(self.coefficients)
        if not np.iscomplexobj(c):
            c = c.astype(float)
        if c.ndim != 1:
            raise BasisError("coefficients must be one-dimensional")
        if c.size > self.basis.size:
            raise BasisError(f"{c.size} coefficients exceed basis size {self.basis.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def N(self) -> int:
        return self.coefficients.size

    def as_normalized(self) -> "ModalVector":
        if self.normalized:
            return self
        # raw phi_n = raw_norm * normalized phi_n, so <f, phi_hat> = <f, phi>/raw_norm
        return ModalVector(self.basis, self.coefficients / self.basis.raw_norm, True, self.note)

    def padded(self, n: int) -> np.ndarray:
        c = self.as_normalized().coefficients
        out = np.zeros(n, dtype=c.dtype)
        m = min(n, c.size)
        out[:m] = c[:m]
        return out

    def scaled(self, t: float) -> "ModalVector":
        return ModalVector(self.basis, t * self.coefficients, self.normalized, self.note)

    def __add__(self, other: "ModalVector") -> "ModalVector":
        if other.basis is not self.basis and other.basis.to_dict() != self.basis.to_dict():
            raise BasisError("cannot add vectors from different bases")
        n = max(self.N, other.N)
        return ModalVector(self.basis, self.padded(n) + other.padded(n), True)

    def to_dict(self) -> dict:
        c = self.coefficients
        coeffs = ([[float(z.real), float(z.imag)] for z in c] if np.iscomplexobj(c)
                  else c.tolist())
        out = self.basis.to_dict()
        out.update({"coefficients": coeffs, "normalized": bool(self.normalized)})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def basis_from_dict(d: dict) -> ModalBasis:
    family, params = d["family"], d.get("params", {})
    n = len(d["eigenvalues"])
    if family == WEBSTER:
        basis = webster_basis(params["a"], n)
    elif family == RECTANGLE:
        basis = rectangle_basis(params["a"], params["b"], n)
    elif family == CUSTOM:
        return custom_basis(d["eigenvalues"])
    else:
        raise BasisError(f"unknown basis family {family!r}")
    if not np.allclose(basis.eigenvalues, d["eigenvalues"], rtol=1e-12, atol=0):
        raise BasisError("stored eigenvalues disagree with the family formula")
    return basis


def vector_from_dict(d: dict, basis: ModalBasis | None = None) -> ModalVector:
    basis = basis or basis_from_dict(d)
    raw = d["coefficients"]
    if raw and isinstance(raw[0], (list, tuple)):
        coeffs = np.array([complex(re, im) for re, im in raw])
    else:
        coeffs = np.asarray(raw, dtype=float)
    return ModalVector(basis, coeffs, bool(d.get("normalized", True)))


def vector_from_json(text: str) -> ModalVector:
    return vector_from_dict(json.loads(text))


def expand(f: Callable, basis: ModalBasis, N: int | None = None,
           quad_nodes: int | None = None, normalized: bool = True) -> ModalVector:
    """Weighted inner products ``<f, phi_n>`` for the first ``N`` modes."""
    if not basis.has_evaluator:
        raise BasisError("expansion needs pointwise eigenfunctions; custom basis has none")
    N = basis.size if N is None else N
    if not 1 <= N <= basis.size:
        raise BasisError(f"N={N} outside 1..{basis.size}")
    floor = basis.default_nodes(N)
    # nodes are per axis on the rectangle, so the floor follows the largest index there
    need = 2 * (max(max(jk) for jk in basis.modes[:N]) if basis.family == RECTANGLE else N)
    if quad_nodes is not None and quad_nodes < need:
        raise BasisError(f"quad_nodes={quad_nodes} below the floor of {need}")
    coords, w = basis.quadrature(max(quad_nodes or 0, floor))
    vals = np.asarray(f(*coords))
    vals = np.broadcast_to(vals, w.shape)
    if not np.all(np.isfinite(vals)):
        raise BasisError("integrand produced non-finite samples")
    fw = vals * w
    coeffs = np.array([fw @ basis.eigenfunction(i, *coords, normalized=normalized)
                       for i in range(N)])
    return ModalVector(basis, coeffs, normalized)


def synthesize(v: ModalVector, *coords):
    """Evaluate ``sum_n v_n phi_n`` at the given points."""
    c = v.as_normalized().coefficients
    out = np.zeros(np.broadcast(*coords).shape, dtype=c.dtype)
    for i, cn in enumerate(c):
        if cn != 0:
            out = out + cn * v.basis.eigenfunction(i, *coords)
    return out


def weighted_norm(f: Callable, basis: ModalBasis, quad_nodes: int = 512) -> float:
    coords, w = basis.quadrature(quad_nodes)
    vals = np.asarray(f(*coords))
    return float(math.sqrt(np.sum(np.abs(np.broadcast_to(vals, w.shape)) ** 2 * w)))


def fractional_norm(v: ModalVector, theta: float) -> float:
    """``||(-L)^theta v||`` from normalized modal coefficients."""
    c = v.as_normalized().coefficients
    mu = v.basis.eigenvalues[: c.size]
    return float(np.sqrt(np.sum(mu ** (2.0 * theta) * np.abs(c) ** 2)))


def inv_sqrt_norm(basis: ModalBasis) -> float:
    """``||(-L)^{-1/2}|| = mu_1^{-1/2}``."""
    return float(basis.eigenvalues[0] ** -0.5)
