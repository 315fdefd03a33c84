import json
import math

import pytest

from polystab import kappa_bounds as kb
from polystab.cli import main
from polystab.perturbation_check import m_constant
from polystab.spectral_model import webster_basis

GOLDEN = {"model": "webster", "a": 2, "damping": {"type": "weak", "function": {"polynomial": [1, -1]}}}


def run(tmp_path, capsys, command, cfg=None, *extra):
    argv = [command]
    if cfg is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        argv += ["--config", str(path)]
    code = main(argv + list(extra))
    out, err = capsys.readouterr()
    return code, out, err


def rank_one_b(fraction):
    kappa = kb.webster_certificate().kappa_max
    M = m_constant("webster", a=2.0, d_norm=math.sqrt(kb.webster_damping_norm_sq(2.0)))
    mu1 = webster_basis(2.0, 1).eigenvalues[0]
    return fraction * kappa / M / math.sqrt(mu1)


def test_reproduce_exits_zero(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "reproduce-webster-example")
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert {r["name"] for r in rep["values"]} >= {"M_R", "M_C", "kappa_max", "eta0"}
    assert all(r["pass"] for r in rep["values"])


def test_bounds_golden_certificate(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "bounds", GOLDEN)
    rep = json.loads(out)
    const = rep["certificate"]["constants"]
    assert code == 0
    assert const["M_R"]["value"] == pytest.approx(5.450968389, rel=1e-9)
    assert const["kappa_max"]["value"] == pytest.approx(0.171164563, rel=1e-8)
    assert "window_premise" in rep and "corrected_c" in rep


def test_bounds_csv_format(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "bounds", GOLDEN, "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "s,eta,delta" and len(lines) > 100


@pytest.mark.parametrize("fraction,expected", [(0.99, 0), (1.01, 1)])
def test_check_bracketing_exit_codes(tmp_path, capsys, fraction, expected):
    cfg = dict(GOLDEN, perturbation={"kind": "webster_rank_one",
                                     "terms": [{"b": {"modal": [rank_one_b(fraction)]}}]},
               kappa="certificate", beta=1, gamma=1)
    code, out, _ = run(tmp_path, capsys, "check", cfg)
    assert code == expected
    assert json.loads(out)["report"]["verdict"] == ("pass" if expected == 0 else "fail")


def test_negative_length_is_invalid(tmp_path, capsys):
    code, out, err = run(tmp_path, capsys, "bounds", {"model": "rectangle", "a": -1, "b": 1})
    assert code == 2 and out == ""
    msg = json.loads(err)
    assert set(msg) == {"error", "message"}


def test_unknown_key_is_invalid(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, "bounds", dict(GOLDEN, colour="red"))
    assert code == 2 and json.loads(err)["error"]


def test_missing_config_is_invalid(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, "sweep")
    assert code == 2 and json.loads(err)["error"] == "missing_config"


def test_bad_seed_and_threads(tmp_path, capsys):
    assert run(tmp_path, capsys, "reproduce-webster-example", None, "--seed", "-1")[0] == 2
    assert run(tmp_path, capsys, "reproduce-webster-example", None, "--threads", "0")[0] == 2


def test_sweep_is_deterministic_and_writes_artifacts(tmp_path, capsys):
    cfg = dict(GOLDEN, N=60, grid={"s_min": 1, "s_max": 20, "step": 0.1}, svg=True)
    out_dir = tmp_path / "art"
    code1, out1, _ = run(tmp_path, capsys, "sweep", cfg, "--out", str(out_dir))
    code2, out2, _ = run(tmp_path, capsys, "sweep", cfg)
    assert code1 == code2 == 0 and out1 == out2
    assert (out_dir / "sweep.json").read_text() == out1
    assert (out_dir / "sweep.csv").read_text().startswith("s,norm")
    assert (out_dir / "sweep.svg").read_text().lstrip().startswith("<")


def test_simulate_csv_is_deterministic(tmp_path, capsys):
    cfg = dict(GOLDEN, N=40, t_max=100, steps=50)
    a = run(tmp_path, capsys, "simulate", cfg, "--format", "csv", "--seed", "3")
    b = run(tmp_path, capsys, "simulate", cfg, "--format", "csv", "--seed", "3")
    assert a[0] == 0 and a[1] == b[1] and a[1].startswith("t,energy")


def test_acoustic_check(tmp_path, capsys):
    cfg = {"model": "acoustic", "kappa": 0.5,
           "perturbation": {"kind": "acoustic_b2g0", "b2": {"sine": [[1, 0.01]]}, "c1": {"constant": 0.01}}}
    code, out, _ = run(tmp_path, capsys, "check", cfg)
    rep = json.loads(out)
    assert code == 0 and rep["report"]["verdict"] == "pass"
    assert rep["expansions"]


def test_acoustic_sweep(tmp_path, capsys):
    cfg = {"model": "acoustic", "N": 64, "grid": {"s_min": 1, "s_max": 20, "step": 0.1}}
    code, out, _ = run(tmp_path, capsys, "sweep", cfg)
    rep = json.loads(out)
    assert code == 0 and rep["spectrum"]["pass"] and rep["dim"] == 128


def test_almost_dissipative_check(tmp_path, capsys):
    cfg = {"model": "rectangle", "a": 1, "b": 1, "N": 40,
           "damping": {"type": "viscous", "function": {"constant": 1}},
           "perturbation": {"kind": "almost_dissipative", "b2": {"sine": [[1, 1, 0.001]]},
                            "c": {"constant": 0.01}}, "kappa": 0.3}
    code, out, _ = run(tmp_path, capsys, "check", cfg)
    assert code == 0 and json.loads(out)["report"]["verdict"] == "pass"


def test_almost_dissipative_needs_viscous(tmp_path, capsys):
    cfg = dict(GOLDEN, perturbation={"kind": "almost_dissipative", "b2": {"sine": [[1, 0.001]]},
                                     "c": {"constant": 0.01}}, kappa=0.3)
    code, _, err = run(tmp_path, capsys, "check", cfg)
    assert code == 2 and json.loads(err)["error"] == "unsupported_damping"


def test_preset_expansion_recorded(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "bounds", GOLDEN)
    exp = json.loads(out)["expansions"]
    assert any("polynomial" in json.dumps(e) for e in (exp.values() if isinstance(exp, dict) else exp))
