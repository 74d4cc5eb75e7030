from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from rcsflock.cli import main
from rcsflock.diagnostics import flocking_certificate
from rcsflock.io import parse_config
from rcsflock.relativistic import lambda0
from rcsflock.scenarios import build_initial

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_two_body_cs(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--config", CONFIGS / "two_body_cs.ini", "--out", tmp_path)
    assert code == 0
    for name in ("trajectory.csv", "diagnostics.json", "manifest.json"):
        assert (tmp_path / name).exists()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert (tmp_path / "trajectory.csv").read_text().startswith(f"# config_hash: {man['config_hash']}")


def test_simulate_rcs_certified(tmp_path, capsys):
    cfg = tmp_path / "short.ini"
    cfg.write_text((CONFIGS / "standard.ini").read_text().replace("t_end = 40", "t_end = 2"))
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--model", "rcs", "--out", tmp_path)
    assert code == 0
    doc = json.loads((tmp_path / "diagnostics.json").read_text())
    assert doc["satisfied"] is True and doc["certificate"]["satisfied"] is True


def test_simulate_deterministic(tmp_path, capsys):
    cfg = tmp_path / "short.ini"
    cfg.write_text((CONFIGS / "standard.ini").read_text().replace("t_end = 40", "t_end = 1"))
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        assert run(capsys, "simulate", "--config", cfg, "--out", d, "--seed", 3)[0] == 0
        outs.append(d)
    for f in ("trajectory.csv", "diagnostics.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    d = tmp_path / "c"
    d.mkdir()
    run(capsys, "simulate", "--config", cfg, "--out", d, "--seed", 4)
    assert (d / "trajectory.csv").read_bytes() != (outs[0] / "trajectory.csv").read_bytes()


def test_broken_config(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nc = -1\n[scenario]\nN = 2\n")
    code, out, err = run(capsys, "simulate", "--config", bad, "--out", tmp_path)
    assert code == 2 and "model.c" in err and out == ""
    code, _, err = run(capsys, "flock-cert", "--config", tmp_path / "missing.ini")
    assert code == 2 and err


def test_numerical_abort_exit(tmp_path, capsys, monkeypatch):
    from rcsflock import cli
    from rcsflock.integrator import NumericalAbort

    def boom(*a, **k):
        raise NumericalAbort(5, 1, 0.05)

    monkeypatch.setattr(cli, "simulate", boom)
    code, _, err = run(capsys, "simulate", "--config", CONFIGS / "two_body_cs.ini", "--out", tmp_path)
    assert code == 3 and "step 5" in err


def test_flock_cert(capsys):
    code, out, _ = run(capsys, "flock-cert", "--config", CONFIGS / "standard.ini")
    doc = json.loads(out)
    assert code == 0 and doc["satisfied"] is True
    params, sim, sc = parse_config(CONFIGS / "standard.ini")
    cert = flocking_certificate(build_initial(sc, params, sim.seed), params)
    assert doc["lambda"] == cert.lam and doc["Dx_inf"] == cert.Dx_inf
    code, out, _ = run(capsys, "flock-cert", "--config", CONFIGS / "hostile.ini")
    assert code == 1 and json.loads(out)["satisfied"] is False


def test_flock_cert_consensus(tmp_path, capsys):
    cfg = tmp_path / "cons.ini"
    cfg.write_text("[model]\nc = 10\n[scenario]\nN = 6\nw_scale = 0\n")
    code, out, _ = run(capsys, "flock-cert", "--config", cfg)
    doc = json.loads(out)
    assert code == 0 and doc["lambda"] == pytest.approx((1 + doc["Dx_inf"] ** 2) ** -1)


def test_climit_exit_codes(capsys):
    code, _, err = run(capsys, "climit", "--config", CONFIGS / "standard.ini", "--c-list", "10,20")
    assert code == 2 and "three" in err
    code, _, err = run(capsys, "climit", "--config", CONFIGS / "standard.ini", "--c-list", "10,20,40", "--pair", "cs,cs")
    assert code == 1 and "undefined" in err


def test_climit_short_pass_and_band(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text((CONFIGS / "standard.ini").read_text().replace("dt = 0.01", "dt = 0.02"))
    out = tmp_path / "scan.json"
    code, text, _ = run(capsys, "climit", "--config", cfg, "--c-list", "10,20,40", "--out", out)
    assert code == 0 and "slope" in text
    doc = json.loads(out.read_text())
    assert doc["pass"] is True and len(doc["scan"]["c_values"]) == len(doc["scan"]["sup_delta"])
    code, _, _ = run(capsys, "climit", "--config", cfg, "--c-list", "10,20,40", "--band=-3,-2")
    assert code == 1


def test_meanfield_flags(capsys):
    cfg = CONFIGS / "kinetic.ini"
    assert run(capsys, "meanfield-scan", "--config", cfg)[0] == 2
    assert run(capsys, "meanfield-scan", "--config", cfg, "--c-list", "10,20,40", "--n-list", "4,8,16")[0] == 2


def test_meanfield_n_list(tmp_path, capsys):
    cfg = tmp_path / "k.ini"
    cfg.write_text((CONFIGS / "kinetic.ini").read_text().replace("t_end = 40", "t_end = 1"))
    out = tmp_path / "mf.json"
    code, _, _ = run(capsys, "meanfield-scan", "--config", cfg, "--n-list", "8,16,32", "--out", out)
    doc = json.loads(out.read_text())
    assert "decreasing_trend" in doc["scan"] and code == (0 if doc["scan"]["decreasing_trend"] else 1)


def test_constants(capsys):
    cfg = CONFIGS / "standard.ini"
    code, out, _ = run(capsys, "constants", "--config", cfg, "--W", 0)
    doc = json.loads(out)
    assert code == 0 and doc["Lambda0"] == pytest.approx(1 / doc["F"], rel=1e-15)
    params, _, _ = parse_config(cfg)
    code, out, _ = run(capsys, "constants", "--config", cfg, "--W", 2.5)
    assert json.loads(out)["Lambda0"] == lambda0(2.5, params)
    big = CONFIGS.parent / "configs" / "standard.ini"
    code, out, _ = run(capsys, "constants", "--config", big, "--W", -1)
    assert code == 2


def test_constants_large_c(tmp_path, capsys):
    cfg = tmp_path / "big.ini"
    cfg.write_text("[model]\nc = 1e6\n[scenario]\nN = 2\n")
    code, out, _ = run(capsys, "constants", "--config", cfg, "--W", 3)
    assert abs(json.loads(out)["Lambda0"] - 1) < 1e-6


def test_wasserstein(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("x1,x2,x3,w1,w2,w3\n0,0,0,0,0,0\n1,0,0,0,0,0\n")
    b.write_text("1,0,0,0,0,0\n0,0,0,0,0,3\n")
    code, out, _ = run(capsys, "wasserstein", a, b)
    doc = json.loads(out)
    assert code == 0 and doc["W1"] == pytest.approx(1.5) and doc["permutation"] == [1, 0]
    c = tmp_path / "c.txt"
    c.write_text("0,0,0,0,0,0\n")
    assert run(capsys, "wasserstein", a, c)[0] == 2


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("RCSFLOCK_THREADS", "zero")
    code, _, err = run(capsys, "climit", "--config", CONFIGS / "standard.ini", "--c-list", "10,20,40")
    assert code == 2 and "RCSFLOCK_THREADS" in err


def test_usage_error_exit(capsys):
    assert run(capsys, "nope")[0] == 2
    assert run(capsys)[0] == 2
