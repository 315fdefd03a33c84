"""Command line entry point: ``polystab {bounds,check,sweep,simulate,reproduce-webster-example}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kappa_bounds as kb
from .acoustic_model import (build_acoustic_discretization, check_acoustic_b2g0,
                             check_acoustic_bg11, estimate_kappa_acoustic)
from .config import (ACOUSTIC, ACOUSTIC_B2G0, ACOUSTIC_BG11, ConfigError, RunConfig, load_config)
from .linalg import SingularResolventError
from .perturbation_check import (ALMOST_DISSIPATIVE, InvalidParameter, best_pair, check,
                                 check_almost_dissipative, m_constant)
from .spectral_model import RECTANGLE, WEBSTER, BasisError, webster_basis
from .svgplot import loglog_svg
from .truncation import (AssemblyError, IntegratorError, Viscous, WeakRankOne, assemble_perturbed,
                         assemble_wave, resolvent_sweep, simulate_decay, spectrum_check)

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("bounds", "check", "sweep", "simulate", "reproduce-webster-example")

# name -> (expected, tolerance)
WEBSTER_EXPECTED = {
    "delta0": (0.8638771, 1e-6),
    "c": (0.98553, 1e-4),
    "eta0": (1.1408, 2e-4),
    "norm_D": (0.7728286, 1e-6),
    "M_R": (5.451, 0.002),
    "norm_Ainv_bound": (0.3582626, 1e-6),
    "M_C": (17.0664, 0.002),
    "kappa_max": (0.1712, 0.0005),
    "M": (1.18116, 1e-5),
    "kappa_over_M": (0.1449, 0.0005),
}


@dataclass
class Result:
    code: int
    report: dict
    csv: str | None = None
    svg: str | None = None


class Failure(Exception):
    def __init__(self, code: int, reason: str, message: str):
        super().__init__(message)
        self.code, self.reason = code, reason


# --- helpers -----------------------------------------------------------------

def _is_webster_golden(cfg: RunConfig) -> bool:
    dmp = cfg.get("damping") or {}
    return (cfg.model == WEBSTER and float(cfg.get("a", 2.0)) == 2.0 and dmp.get("type") == "weak"
            and dmp.get("function") in ({"polynomial": [1, -1]}, {"polynomial": [1.0, -1.0]}))


def _damping_norm_sq(cfg: RunConfig) -> float:
    if _is_webster_golden(cfg):
        return kb.webster_damping_norm_sq(2.0)
    if cfg.damping_vector is not None:
        return float(np.sum(np.abs(cfg.damping_vector.as_normalized().coefficients) ** 2))
    if cfg.damping_data is not None:
        coords, w = cfg.basis.quadrature(cfg.basis.default_nodes())
        dv = np.broadcast_to(np.asarray(cfg.damping_data.f(*coords), dtype=float), w.shape)
        return float(np.sum(w * dv ** 2))
    return 0.0


def _damping_sup(cfg: RunConfig) -> float:
    dmp = cfg.get("damping") or {}
    if "sup" in dmp:
        return float(dmp["sup"])
    if cfg.damping_data is None:
        if cfg.damping is not None:
            raise Failure(EXIT_INVALID, "missing_sup", "modal damping needs damping.sup for this model")
        return 0.0
    coords, w = cfg.basis.quadrature(cfg.basis.default_nodes())
    return float(np.max(np.abs(cfg.damping_data.f(*coords))))


def certificate_for(cfg: RunConfig, s0=None, optimize=None) -> tuple[kb.KappaCertificate, dict]:
    """Certificate for a rank-one damped wave model, plus side information."""
    if cfg.model == ACOUSTIC:
        raise Failure(EXIT_INVALID, "unsupported_model",
                      "no analytic kappa certificate for the acoustic model; use kappa='numeric'")
    if not isinstance(cfg.damping, WeakRankOne):
        raise Failure(EXIT_INVALID, "unsupported_damping",
                      "certified bounds need rank-one (weak) damping with nonzero modal coefficients")
    alpha = float(cfg.get("alpha", 2.0))
    s0 = cfg.get("s0", kb.REFERENCE_S0) if s0 is None else s0
    optimize = bool(cfg.get("optimize_s0", False)) if optimize is None else optimize
    extra = {}
    if _is_webster_golden(cfg) and alpha == 2.0:
        cert = kb.webster_certificate(s0=s0, optimize=optimize)
        windows = kb.webster_windows(2.0, webster_basis(2.0, 200))
        extra["window_premise"] = kb.window_premise_report(windows, cfg.basis, cfg.damping_vector)
        c_true, n_true = kb.webster_c_exact()
        corrected = kb.webster_certificate(s0=s0, optimize=optimize, c=c_true)
        extra["corrected_c"] = {"c": c_true, "attained_at_mode": n_true,
                                "kappa_max": corrected.kappa_max, "M_C": corrected.M_C,
                                "provenance": "min_n |lambda_n| |<phi_n, 1-x>| from the closed-form coefficients"}
        return cert, extra
    try:
        windows = kb.gap_windows(cfg.basis, cfg.damping_vector)
    except kb.WindowError as exc:
        raise Failure(EXIT_INVALID, "window", str(exc)) from exc
    norm_D = math.sqrt(_damping_norm_sq(cfg))
    norm_ainv = kb.norm_ainv_bound(cfg.basis, cfg.damping_vector)
    cert = kb.certify(windows, norm_D, norm_ainv, alpha, s0=s0, optimize=optimize)
    extra["window_premise"] = kb.window_premise_report(windows, cfg.basis, cfg.damping_vector)
    return cert, extra


def m_for(cfg: RunConfig) -> tuple[float, str]:
    if "M" in cfg.raw:
        return float(cfg.raw["M"]), "config"
    if cfg.damping is None:
        return 1.0, "no damping"
    if cfg.model == WEBSTER:
        d_norm = math.sqrt(_damping_norm_sq(cfg))
        return m_constant("webster", a=float(cfg.get("a", 2.0)), d_norm=d_norm), \
            "1 + ||d||^2 (a^2/4 + pi^2)^-1/2"
    if cfg.model == RECTANGLE:
        ctx = "almost_dissipative" if _pert_kind(cfg) == ALMOST_DISSIPATIVE else "rectangle"
        form = "||d||_inf^2" if ctx == "almost_dissipative" else "||d||_inf"
        return m_constant(ctx, a=cfg.basis.params["a"], b=cfg.basis.params["b"],
                          d_sup=_damping_sup(cfg)), f"1 + ab {form} / (pi sqrt(a^2 + b^2))"
    return m_constant("generic", norm_D=math.sqrt(_damping_norm_sq(cfg)), basis=cfg.basis), \
        "1 + ||D_0||^2 ||(-L)^-1/2||"


def _pert_kind(cfg: RunConfig):
    p = cfg.get("perturbation")
    return p["kind"] if p else None


def build_system(cfg: RunConfig, with_perturbation: bool = True):
    if cfg.model == ACOUSTIC:
        a = cfg.acoustic
        disc = build_acoustic_discretization(a.N, a.k, a.d)
        if with_perturbation and cfg.perturbation is not None:
            return disc.perturbed(cfg.perturbation)
        return disc.truncated()
    sys_ = assemble_wave(cfg.basis, cfg.damping, alpha=float(cfg.get("alpha", 2.0)))
    if with_perturbation and cfg.perturbation is not None:
        if cfg.perturbation.kind == ALMOST_DISSIPATIVE:
            raise Failure(EXIT_INVALID, "unsupported_perturbation",
                          "almost-dissipative perturbations are checked, not assembled")
        sys_ = assemble_perturbed(sys_, cfg.perturbation)
    return sys_


def _grid(cfg: RunConfig, s_min=1.0, s_max=50.0, step=0.05) -> np.ndarray:
    g = cfg.get("grid") or {}
    lo, hi, st = float(g.get("s_min", s_min)), float(g.get("s_max", s_max)), float(g.get("step", step))
    if hi <= lo:
        raise Failure(EXIT_INVALID, "grid", "grid.s_max must exceed grid.s_min")
    return np.arange(lo, hi + 0.5 * st, st)


# --- commands ----------------------------------------------------------------

def cmd_bounds(cfg: RunConfig, threads=None) -> Result:
    cert, extra = certificate_for(cfg)
    report = {"command": "bounds", "model": cfg.model, "certificate": cert.to_dict(), **extra,
              "expansions": cfg.expansions}
    if _is_webster_golden(cfg):
        windows = kb.webster_windows(2.0)
    else:
        windows = kb.gap_windows(cfg.basis, cfg.damping_vector)
    s = _grid(cfg, 0.0, 50.0, 0.05)
    delta, eta = windows.sample(s)
    rows = ["s,eta,delta"] + [f"{a!r},{b!r},{c!r}" for a, b, c in
                              zip(s.tolist(), eta.tolist(), delta.tolist())]
    return Result(EXIT_PASS, report, "\n".join(rows) + "\n")


def _resolve_kappa(cfg: RunConfig, threads) -> tuple[float, dict]:
    k = cfg.get("kappa", "certificate")
    if not isinstance(k, str):
        return float(k), {"source": "config"}
    if k == "certificate":
        cert, _ = certificate_for(cfg)
        return cert.kappa_max, {"source": "certificate", "M_C": cert.M_C, "s0": cert.s0}
    n = int(cfg.get("n", 2))
    if n not in (1, 2):
        raise Failure(EXIT_INVALID, "invalid_parameter", "numeric kappa needs n = 1 or 2")
    if cfg.model == ACOUSTIC:
        a = cfg.acoustic
        g = cfg.get("grid") or {}
        out = estimate_kappa_acoustic(a.N, a.k, a.d, n=n, s_max=float(g.get("s_max", 50.0)),
                                      step=float(g.get("step", 0.05)), threads=threads)
    else:
        out = kb.resolvent_sup(build_system(cfg, with_perturbation=False), n,
                               _grid(cfg, 0.0, 50.0, 0.05), threads=threads)
    return out["kappa"], {"source": "numeric (not certified)", **out}


def cmd_check(cfg: RunConfig, threads=None) -> Result:
    p = cfg.perturbation
    if p is None:
        raise Failure(EXIT_INVALID, "missing_perturbation", "check needs a perturbation block")
    kappa, kinfo = _resolve_kappa(cfg, threads)
    kind = _pert_kind(cfg)
    if kind in (ACOUSTIC_BG11, ACOUSTIC_B2G0):
        fn = check_acoustic_bg11 if kind == ACOUSTIC_BG11 else check_acoustic_b2g0
        rep = fn(p, cfg.acoustic.k, kappa)
        m_src = "K_theta = 1 for the acoustic conditions"
    elif kind == ALMOST_DISSIPATIVE:
        if not isinstance(cfg.damping, Viscous):
            raise Failure(EXIT_INVALID, "unsupported_damping",
                          "almost-dissipative check needs viscous damping d(x)")
        d_order = cfg.damping_data.order
        rep = check_almost_dissipative(p.b[0], p.c1[0], cfg.damping_data.f, kappa,
                                       M=cfg.raw.get("M"), alpha=float(cfg.get("alpha", 2.0)),
                                       d_smoothness=d_order,
                                       d_sup=(cfg.get("damping") or {}).get("sup"))
        m_src = "max of the stated and chain forms"
    else:
        M, m_src = m_for(cfg)
        alpha = float(cfg.get("alpha", 2.0))
        if "beta" in cfg.raw or "gamma" in cfg.raw:
            beta = float(cfg.get("beta", 1.0))
            gamma = float(cfg.get("gamma", 1.0))
            rep = check(p, alpha, beta, gamma, kappa, M)
        else:
            rep = best_pair(p, alpha, kappa, M)
    report = {"command": "check", "model": cfg.model, "report": rep.to_dict(),
              "kappa_source": kinfo, "M_source": m_src, "expansions": cfg.expansions}
    rows = ["name,measured,threshold,pass"] + [
        f"{c.name},{c.measured!r},{c.threshold!r},{str(c.passed).lower()}" for c in rep.conditions]
    return Result(EXIT_PASS if rep.verdict else EXIT_FAIL, report, "\n".join(rows) + "\n")


def cmd_sweep(cfg: RunConfig, threads=None) -> Result:
    sys_ = build_system(cfg)
    n = int(cfg.get("n", 0))
    prof = resolvent_sweep(sys_, _grid(cfg), n=n, threads=threads)
    spec = spectrum_check(sys_)
    spec.pop("eigenvalues")
    report = {"command": "sweep", "model": cfg.model, "system": sys_.label, "dim": sys_.dim,
              "resolvent": prof.summary(), "spectrum": spec,
              "symmetric_part_max_eig": sys_.symmetric_part_max_eig(),
              "provenance": {"resolvent": "||R(is, A_N) A_N^-n|| measured on the grid plus eigenfrequencies",
                             "exponent": "log-log least squares over local maxima of the upper half",
                             "spectrum": "max Re eig(A_N) against 64 eps ||A_N||_2"},
              "expansions": cfg.expansions}
    svg = None
    if cfg.get("svg"):
        svg = loglog_svg(prof.s, prof.values, f"resolvent norm, {sys_.label}", "s",
                         f"||R(is,A) A^-{n}||")
    return Result(EXIT_PASS if spec["pass"] else EXIT_FAIL, report, prof.to_csv(), svg)


def cmd_simulate(cfg: RunConfig, threads=None) -> Result:
    sys_ = build_system(cfg)
    trace = simulate_decay(sys_, smoothness=int(cfg.get("smoothness", 1)),
                           t_max=float(cfg.get("t_max", 1000.0)), steps=int(cfg.get("steps", 200)),
                           seed=int(cfg.get("seed", 0)), profile=cfg.get("profile", "critical"))
    report = {"command": "simulate", "model": cfg.model, "system": sys_.label, "dim": sys_.dim,
              "decay": trace.summary(),
              "provenance": {"energy": "||u(t)||^2 from the trapezoidal (Cayley) scheme",
                             "slope": "log-log least squares over [t_max/100, t_max]"},
              "expansions": cfg.expansions}
    svg = None
    if cfg.get("svg"):
        svg = loglog_svg(trace.t[1:], trace.energy[1:], f"energy decay, {sys_.label}", "t", "E(t)")
    return Result(EXIT_PASS, report, trace.to_csv(), svg)


def reproduce_webster_example() -> Result:
    """Golden Webster pipeline (a = 2, d = 1 - x) diffed against stored values."""
    cert = kb.webster_certificate()
    windows = kb.webster_windows(2.0)
    d_norm = math.sqrt(kb.webster_damping_norm_sq(2.0))
    M = m_constant("webster", a=2.0, d_norm=d_norm)
    got = {"delta0": windows.delta0, "c": windows.details["c"], "eta0": windows.eta0,
           "norm_D": d_norm, "M_R": cert.M_R, "norm_Ainv_bound": cert.norm_Ainv_bound,
           "M_C": cert.M_C, "kappa_max": cert.kappa_max, "M": M, "kappa_over_M": cert.kappa_max / M}
    formulas = {"delta0": "pi^2/(a + 3 pi)", "c": "min{F(1), G(2)}", "eta0": "c/delta0",
                "norm_D": "||1 - x|| in L2_a", "M": "1 + ||d||^2 (a^2/4 + pi^2)^-1/2",
                "kappa_over_M": "kappa_max / M", **cert.provenance}
    rows, ok = [], True
    for name, (want, tol) in WEBSTER_EXPECTED.items():
        diff = got[name] - want
        passed = abs(diff) <= tol
        ok &= passed
        rows.append({"name": name, "value": got[name], "expected": want, "tolerance": tol,
                     "diff": diff, "pass": passed, "formula": formulas.get(name, "")})
    report = {"command": "reproduce-webster-example", "pass": ok, "values": rows,
              "M_0": {"value": cert.M_0, "formula": formulas["M_0"]},
              "s0": cert.s0, "certificate": cert.to_dict()}
    csv_rows = ["name,value,expected,tolerance,diff,pass"] + [
        f"{r['name']},{r['value']!r},{r['expected']!r},{r['tolerance']!r},{r['diff']!r},"
        f"{str(r['pass']).lower()}" for r in rows]
    return Result(EXIT_PASS if ok else EXIT_FAIL, report, "\n".join(csv_rows) + "\n")


HANDLERS = {"bounds": cmd_bounds, "check": cmd_check, "sweep": cmd_sweep, "simulate": cmd_simulate}


def run(command: str, cfg: RunConfig | None, threads: int | None = None) -> Result:
    if command == "reproduce-webster-example":
        return reproduce_webster_example()
    if cfg is None:
        raise Failure(EXIT_INVALID, "missing_config", f"{command} needs --config")
    return HANDLERS[command](cfg, threads)


# --- output ------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.floating, float)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    return o


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def emit(result: Result, command: str, fmt: str, out: Path | None, stream=None) -> None:
    stream = stream or sys.stdout
    text = dumps(result.report)
    stream.write(result.csv if fmt == "csv" and result.csv is not None else text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{command}.json").write_text(text)
        if result.csv is not None:
            (out / f"{command}.csv").write_text(result.csv)
        if result.svg is not None:
            (out / f"{command}.svg").write_text(result.svg)


def _error(reason: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": reason, "message": message}, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polystab",
                                     description="Robustness bounds for polynomially stable damped waves.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="directory for JSON/CSV/SVG artifacts")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    parser.add_argument("--threads", type=int, help="worker threads (default: POLYSTAB_THREADS or 1)")
    parser.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        return _error("invalid_parameter", "seed must be an unsigned 64-bit integer", EXIT_INVALID)
    if args.threads is not None and args.threads < 1:
        return _error("invalid_parameter", "threads must be >= 1", EXIT_INVALID)
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.raw["seed"] = args.seed
        result = run(args.command, cfg, args.threads)
    except Failure as exc:
        return _error(exc.reason, str(exc), exc.code)
    except ConfigError as exc:
        return _error(exc.reason, str(exc), EXIT_INVALID)
    except (InvalidParameter, BasisError, kb.WindowError, AssemblyError) as exc:
        return _error("invalid_parameter", str(exc), EXIT_INVALID)
    except (SingularResolventError, IntegratorError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _error("numeric_failure", str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        return _error("invalid_input", str(exc), EXIT_INVALID)
    emit(result, args.command, args.format, args.out)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
