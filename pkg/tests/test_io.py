from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcsflock.classical_limit import LimitScanResult
from rcsflock.diagnostics import flocking_certificate
from rcsflock.integrator import SimConfig, Trajectory, simulate
from rcsflock.io import (
    ConfigError,
    Scenario,
    config_hash,
    dumps_report,
    new_manifest,
    parse_config,
    parse_config_text,
    read_trajectory_csv,
    serialize_config,
    write_manifest,
    write_report_json,
    write_trajectory_csv,
)
from rcsflock.relativistic import uniform_params
from rcsflock.scenarios import standard_flocking

MINIMAL = "[model]\nc = 10\nkernel = constant\n[scenario]\nN = 4\n"


def test_minimal_defaults():
    params, sim, sc = parse_config_text(MINIMAL)
    assert params.k_B == 1.0 and params.T_star == 1.0 and params.agents == ((1.0, 3.0),)
    assert params.kernel.kind == "constant"
    assert sim.dt == 0.01 and sim.model == "rcs"
    assert sc.N == 4 and sc.kind == "uniform_box"
    _, sim, _ = parse_config_text("[model]\nc = 10\nT_star = 0.05\n[scenario]\nN = 4\n")
    assert sim.dt == pytest.approx(0.005)


@pytest.mark.parametrize(
    "text, key",
    [
        ("[model]\nc = -1\n[scenario]\nN = 2\n", "model.c"),
        ("[model]\nc = 10\nkernel = gauss\n[scenario]\nN = 2\n", "model.kernel"),
        ("[model]\nc = 10\nspeed = 3\n[scenario]\nN = 2\n", "model.speed"),
        ("[scenario]\nN = 2\n", "model.c"),
        ("[model]\nc = 10\n", "scenario.N"),
        ("[model]\nc = ten\n[scenario]\nN = 2\n", "model.c"),
        ("[model]\nc = 10\n[simulation]\ndt = 5\nt_end = 1\n[scenario]\nN = 2\n", "simulation.dt"),
        ("[model]\nc = 10\n[scenario]\nN = 2\nkind = explicit\npositions = 0 0 0\nvelocities = 0 0 0\n", "scenario.positions"),
        ("[model]\nc = 10\n[scenario]\nN = 2\nclimit_band = -3, -4\n", "scenario.climit_band"),
        ("[model]\nc = 10\n[extra]\na = 1\n[scenario]\nN = 2\n", "extra"),
    ],
)
def test_validation_names_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.key == key and key in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.ini")


@given(
    st.floats(0.1, 1e4),
    st.floats(1e-3, 10),
    st.integers(1, 50),
    st.floats(0, 3),
    st.sampled_from(["rcs", "cs"]),
    st.lists(st.floats(1, 100), min_size=3, max_size=5),
)
def test_round_trip(c, T, N, K, model, cs):
    text = (
        f"[model]\nc = {c!r}\nT_star = {T!r}\n[simulation]\nmodel = {model}\nt_end = 1\ndt = 0.001\n"
        f"[scenario]\nN = {N}\nK = {K!r}\nc_list = {', '.join(map(repr, cs))}\n"
    )
    first = parse_config_text(text)
    again = parse_config_text(serialize_config(*first))
    assert first == again
    assert serialize_config(*again) == serialize_config(*first)


def test_round_trip_explicit_and_heterogeneous():
    text = (
        "[model]\nc = 5\nmass = 1, 2\ndof = 3\n[scenario]\nN = 2\nkind = explicit\nmode = from_v\n"
        "positions = 0 0 0; 1 0.1 0\nvelocities = 0.5 0 0; -0.25 0 1e-3\n"
    )
    first = parse_config_text(text)
    assert first[0].agents == ((1.0, 3.0), (2.0, 3.0))
    assert parse_config_text(serialize_config(*first)) == first


def _traj(n_agents=1, t_end=0.1, dt=0.1):
    p = uniform_params(10.0)
    from rcsflock.dynamics import EnsembleState

    rng = np.random.default_rng(0)
    init = EnsembleState(0.0, rng.normal(size=(n_agents, 3)), rng.normal(size=(n_agents, 3)) / 3)
    return simulate(init, p, SimConfig(dt=dt, t_end=t_end))


def test_csv_rows_and_exact_round_trip(tmp_path):
    tr = _traj(1)
    assert len(tr) == 2
    entry = write_trajectory_csv(tr, tmp_path / "a.csv", "abc")
    assert entry.rows == 2
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "# config_hash: abc" and lines[1] == "t,agent,x1,x2,x3,w1,w2,w3" and len(lines) == 4
    tr = _traj(5, t_end=1.0)
    write_trajectory_csv(tr, tmp_path / "b.csv")
    tab = read_trajectory_csv(tmp_path / "b.csv")
    assert tab.x.tobytes() == tr.X.tobytes() and tab.w.tobytes() == tr.W.tobytes()
    assert tab.t.tobytes() == tr.times.tobytes()
    # CSV -> parse -> CSV is idempotent
    again = Trajectory(tab.states(), tr.config, tr.params)
    write_trajectory_csv(again, tmp_path / "c.csv")
    assert (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_csv_empty(tmp_path):
    tr = Trajectory([], SimConfig(dt=0.1, t_end=1.0), uniform_params(10.0))
    write_trajectory_csv(tr, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "t,agent,x1,x2,x3,w1,w2,w3\n"
    assert len(read_trajectory_csv(tmp_path / "e.csv").t) == 0


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_trajectory_csv(_traj(), tmp_path / "missing" / "a.csv")


def test_certificate_json_schema(tmp_path):
    init, p, _ = standard_flocking()
    write_report_json(flocking_certificate(init, p), tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert {"Dx_inf", "lambda", "condition_lhs", "condition_rhs", "satisfied"} <= doc.keys()
    assert doc["schema_version"] == 1 and doc["kind"] == "flocking_certificate"


def test_scan_json_schema():
    res = LimitScanResult([10.0, 20.0, 40.0], [1e-4, 6e-6, 4e-7], -4.0, 0.0, 1.0)
    doc = json.loads(dumps_report(res))
    assert len(doc["c_values"]) == len(doc["sup_delta"]) == 3
    undefined = LimitScanResult([10.0, 20.0, 40.0], [0.0, 0.0, 0.0], math.nan, math.nan, math.nan)
    assert json.loads(dumps_report(undefined))["slope"] is None


def test_nan_rejected(tmp_path):
    with pytest.raises(ValueError, match="non-finite"):
        write_report_json({"x": [1.0, float("nan")]}, tmp_path / "n.json")
    with pytest.raises(ValueError, match="non-finite"):
        dumps_report({"a": {"b": np.array([np.inf])}})


def test_manifest(tmp_path):
    params, sim, sc = parse_config_text(MINIMAL)
    m = new_manifest(params, sim, sc)
    assert m.config_hash == config_hash(params, sim, sc)
    entry = write_report_json({"a": 1}, tmp_path / "r.json", config_hash=m.config_hash)
    m.files.append(entry)
    write_manifest(m, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["files"][0]["path"].endswith("r.json")
    m.files.append(type(entry)(str(tmp_path / "ghost.json"), "report_json", m.config_hash))
    with pytest.raises(FileNotFoundError):
        write_manifest(m, tmp_path / "m2.json")


def test_hash_changes_with_config():
    a = parse_config_text(MINIMAL)
    b = parse_config_text(MINIMAL.replace("c = 10", "c = 11"))
    assert config_hash(*a) != config_hash(*b)
    assert isinstance(a[2], Scenario)
