"""One pass/fail line per acceptance criterion, at the stated tolerances."""

import math
import time

import numpy as np

from bracketing import bracket
from conftest import ACCEPTANCE_LINES
from polystab import kappa_bounds as kb
from polystab import perturbation_check as pc
from polystab.acoustic_model import (AcousticPerturbation, build_acoustic_discretization,
                                     check_acoustic_b2g0, check_acoustic_bg11)
from polystab.linalg import resolvent_operator
from polystab.spectral_model import (ModalVector, expand, gauss_legendre, rectangle_basis,
                                     webster_basis)
from polystab.truncation import (WeakRankOne, assemble_wave, resolvent_sweep, simulate_decay,
                                 spectrum_check)


def record(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_golden_constants():
    t0 = time.perf_counter()
    cert = kb.webster_certificate()
    M = pc.m_constant("webster", a=2.0, d_norm=math.sqrt(kb.webster_damping_norm_sq(2.0)))
    elapsed = time.perf_counter() - t0
    checks = [("M_R", cert.M_R, 5.451, 0.002), ("M_C", cert.M_C, 17.0664, 0.002),
              ("kappa_max", cert.kappa_max, 0.1712, 0.0005), ("kappa/M", cert.kappa_max / M, 0.1449, 0.0005)]
    ok = all(abs(v - want) <= tol for _, v, want, tol in checks) and elapsed < 1.0
    detail = ", ".join(f"{n}={v:.6f}" for n, v, _, _ in checks) + f", {elapsed:.3f}s"
    record("golden constants", ok, detail)


def test_closed_form_oracle():
    t0 = time.perf_counter()
    x, w = gauss_legendre(0.0, 1.0, 1024)
    n = np.arange(1, 51)
    quad = np.array([np.sum(np.exp(2 * x) * (1 - x) * np.exp(-x) * np.sin(math.pi * k * x) * w)
                     for k in n])
    raw = kb.webster_damping_coefficient(n, 2.0)
    basis = webster_basis(2.0, 50)
    via_expand = expand(lambda s: 1 - s, basis).coefficients * basis.raw_norm
    err = max(np.max(np.abs(quad - raw)), np.max(np.abs(via_expand - raw)))
    elapsed = time.perf_counter() - t0
    record("closed-form oracle", err < 1e-8 and elapsed < 1.0, f"max |diff| = {err:.2e}, {elapsed:.3f}s")


def test_orthonormality():
    worst = 0.0
    for b in (webster_basis(0.0, 20), webster_basis(2.0, 20), rectangle_basis(1.0, 1.0, 20)):
        worst = max(worst, float(np.max(np.abs(b.gram() - np.eye(20)))))
    record("orthonormality", worst < 1e-10, f"max Gram deviation = {worst:.2e}")


def test_brute_force_c():
    n = np.arange(1, 10_001)
    F, G = kb.webster_F(n), kb.webster_G(n)
    c = kb.webster_c()
    stated = min(float(kb.webster_F(1)), float(kb.webster_G(2)))
    ok = (min(F.min(), G[1:].min()) == c == stated and bool(np.all(np.diff(G[1:]) > 0)))
    record("brute-force c", ok, f"c = {c:.9f} = min(F(1), G(2)); G increasing on 2..10^4")


def test_resolvent_growth(golden_system, golden_certificate, golden_damping):
    t0 = time.perf_counter()
    prof = resolvent_sweep(golden_system, np.arange(1.0, 50.0001, 0.05))
    elapsed = time.perf_counter() - t0
    cert = golden_certificate
    bounded = bool(np.all(prof.values <= cert.M_R * cert.M_0 * (1 + prof.s ** 2)))
    W100 = webster_basis(2.0, 100)
    small = assemble_wave(W100, WeakRankOne(ModalVector(W100, golden_damping.coefficients[:100])))
    s = [1.0, 5.0, 10.0, 25.0]
    change = float(np.max(np.abs(resolvent_operator(small).sweep(s) / resolvent_operator(golden_system).sweep(s) - 1)))
    ok = abs(prof.exponent - 2.0) <= 0.2 and bounded and elapsed < 60 and change < 0.01
    record("resolvent growth", ok, f"exponent = {prof.exponent:.4f}, bounded by M_R M_0 (1+s^2): {bounded}, "
                                   f"N=100 vs 200 change = {change:.2e}, {elapsed:.1f}s")


def test_decay_rate(golden_system):
    t0 = time.perf_counter()
    tr = simulate_decay(golden_system, smoothness=1, t_max=1000.0)
    elapsed = time.perf_counter() - t0
    ok = abs(tr.slope + 1.0) <= 0.2 and elapsed < 60
    record("decay rate", ok, f"slope = {tr.slope:.4f}, max increase = {tr.max_increase:.1e}, {elapsed:.1f}s")


W20 = webster_basis(2.0, 20)
R30 = rectangle_basis(1.0, 1.0, 30)
KAPPA, M_WEB = 0.1712, 1 + (math.e ** 2 - 5) / (4 * math.sqrt(1 + math.pi ** 2))


def _mv(*c, basis=W20):
    return ModalVector(basis, np.array(c, dtype=float))


def _sine(t):
    return dict(b2=lambda x: t * np.sin(math.pi * x), db2=lambda x: t * math.pi * np.cos(math.pi * x),
                d2b2=lambda x: -t * math.pi ** 2 * np.sin(math.pi * x))


def _bump(x, y):
    return 1.0 + 0.5 * np.sin(math.pi * x) * np.sin(math.pi * y)


BRACKET_CASES = {
    "rank_one": (lambda t: pc.check(pc.Perturbation(pc.RANK_ONE, (_mv(t, t / 2),), (None,), (None,)),
                                    2.0, 1.0, 1.0, KAPPA, M_WEB), {"b"}, 1),
    "webster_rank_one": (lambda t: pc.check(pc.Perturbation(pc.WEBSTER_RANK_ONE, (_mv(t),), (None,), (None,)),
                                            2.0, 1.0, 1.0, KAPPA, M_WEB), {"b"}, 1),
    "finite_rank": (lambda t: pc.check_finite_rank(
        pc.Perturbation(pc.FINITE_RANK, (_mv(0.01), _mv(0.0, t)), (None, None), (None, None)),
        2.0, 1.0, 1.0, KAPPA, M_WEB), {"b[2]"}, 1),
    "hilbert_schmidt": (lambda t: pc.check_hilbert_schmidt(
        pc.Perturbation(pc.HILBERT_SCHMIDT, (_mv(t), _mv(0.0, t)), (None, _mv(0.01)), (None, None)),
        2.0, 1.0, 1.0, KAPPA, M_WEB), {"b"}, 2),
    "almost_dissipative": (lambda t: pc.check_almost_dissipative(
        _mv(t, 0.3 * t, basis=R30), None, _bump, 0.3), None, 2),
    "acoustic_bg11": (lambda t: check_acoustic_bg11(AcousticPerturbation(b2=_sine(t)["b2"]), 1.0, 0.5),
                      None, 1),
    "acoustic_b2g0": (lambda t: check_acoustic_b2g0(AcousticPerturbation(**_sine(t)), 1.0, 0.5), None, 1),
}


def test_threshold_bracketing():
    outcomes = []
    for kind, (build, names, power) in BRACKET_CASES.items():
        if names is None:
            names = {c.name for c in build(1.0).conditions if c.name.startswith("b")}
        ok_lo, ok_hi, _, _ = bracket(build, names, power)
        outcomes.append((kind, ok_lo and not ok_hi))
    record("threshold bracketing", all(o for _, o in outcomes),
           ", ".join(f"{k}={'flips' if o else 'NO FLIP'}" for k, o in outcomes))


def test_conservativeness(golden_system, golden_certificate):
    t0 = time.perf_counter()
    out = kb.resolvent_sup(golden_system, 2, np.arange(0.0, 50.0001, 0.01))
    elapsed = time.perf_counter() - t0
    ok = out["kappa"] >= 0.1712 and out["kappa"] >= golden_certificate.kappa_max
    record("conservativeness", ok, f"numeric kappa = {out['kappa']:.6f} >= certified "
                                   f"{golden_certificate.kappa_max:.6f}, {elapsed:.1f}s")


def test_acoustic_decay():
    disc = build_acoustic_discretization(256, 1.0, 1.0)
    sys_ = disc.truncated()
    spec = spectrum_check(sys_)
    tr = simulate_decay(sys_, smoothness=1, t_max=1000.0)
    ok = spec["pass"] and tr.max_increase <= 1e-9 and abs(tr.slope + 1.0) <= 0.2
    record("acoustic decay", ok, f"max Re = {spec['max_real']:.2e}, max increase = {tr.max_increase:.1e}, "
                                 f"slope = {tr.slope:.4f}")
