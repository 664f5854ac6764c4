import json

import numpy as np
import pytest

from liectrl import cli
from liectrl.config import (
    DEFAULTS,
    ConfigError,
    algebra_from_json,
    algebra_to_json,
    config_from_dict,
    load_config,
    shipped_systems,
)
from liectrl.pipeline import CrossCheck, analyze, public

SHIPPED = ["heisenberg_hyperbolic", "heisenberg_zero_spectrum", "planar_hyperbolic", "scalar_stable", "scalar_unstable"]


def scalar_config(d=1.0, **sim):
    return {
        "name": "s",
        "algebra": {"dim": 1, "brackets": []},
        "derivation": [[d]],
        "controls": [[1.0]],
        "omega": {"box": [1.0]},
        "simulation": {"box": [[-3.0, 3.0]], "cells_per_axis": 61, "horizon": 4.0, **sim},
    }


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_shipped_systems_load():
    assert shipped_systems() == SHIPPED
    for name in SHIPPED:
        cfg = load_config(name)
        assert cfg.spec.name == name


def test_defaults_table():
    assert DEFAULTS["dwell"] == 0.1
    assert DEFAULTS["grid_dt"] == 1e-2
    assert DEFAULTS["trajectory_dt"] == 1e-3
    assert DEFAULTS["cells_per_axis"] == 151


def test_algebra_json_is_one_based_and_round_trips():
    a = algebra_from_json({"dim": 3, "brackets": [{"i": 1, "j": 2, "result": [0, 0, 1]}]})
    assert a.structure[2, 0, 1] == 1.0 and a.structure[2, 1, 0] == -1.0
    b = algebra_from_json(algebra_to_json(a))
    np.testing.assert_array_equal(a.structure, b.structure)
    flipped = algebra_from_json({"dim": 3, "brackets": [{"i": 2, "j": 1, "result": [0, 0, 1]}]})
    np.testing.assert_array_equal(flipped.structure, -a.structure)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda c: c.pop("derivation"), "derivation"),
        (lambda c: c.update(omega={"box": [0.0]}), "interior"),
        (lambda c: c.update(omega={"circle": 1}), "omega"),
        (lambda c: c.update(derivation=[[1.0, 0.0]]), "derivation"),
        (lambda c: c.update(simulation={"box": [[0.5, 3.0]]}), "origin"),
        (lambda c: c.update(flags={"bogus": True}), "unknown flags"),
        (lambda c: c.update(algebra={"dim": 1, "brackets": [{"i": 1, "j": 1, "result": [1]}]}), "i == j"),
    ],
)
def test_invalid_configs_rejected(mutate, message):
    c = scalar_config()
    mutate(c)
    with pytest.raises(ConfigError) as info:
        config_from_dict(c)
    assert message in str(info.value)


def test_non_derivation_rejected():
    c = {
        "algebra": {"dim": 3, "brackets": [{"i": 1, "j": 2, "result": [0, 0, 1]}]},
        "derivation": np.eye(3).tolist(),
        "controls": [[1, 0, 0]],
        "omega": {"box": [1.0]},
    }
    with pytest.raises(ConfigError, match="not a derivation"):
        config_from_dict(c)


def test_jacobi_failure_rejected():
    c = {
        "algebra": {
            "dim": 3,
            "brackets": [{"i": 1, "j": 2, "result": [0, 1, 0]}, {"i": 2, "j": 3, "result": [1, 0, 0]}],
        },
        "derivation": np.zeros((3, 3)).tolist(),
        "controls": [[1, 0, 0]],
        "omega": {"box": [1.0]},
    }
    with pytest.raises(ConfigError, match="Jacobi"):
        config_from_dict(c)


def test_analyze_heisenberg_hyperbolic():
    res = public(analyze(load_config("heisenberg_hyperbolic")))
    assert res["decomposition"]["dims"] == {"g_plus": 1, "g_zero": 1, "g_minus": 1}
    assert res["decomposition"]["hyperbolic"] is False
    assert res["grading"]["ok"] and res["grading"]["residual"] < 1e-9
    assert res["identities"]["g_plus_zero + g_minus = g"]
    json.dumps(res)


def test_cross_check_lines():
    assert CrossCheck("open", "yes", "yes").line() == "AGREE(open): theory yes, grid yes"
    assert CrossCheck("closed", "no", "yes").status == "DISAGREE"
    assert CrossCheck("bounded", "unknown", "yes").status == "UNDECIDED"


def test_cli_analyze_text_and_json(capsys):
    assert cli.main(["analyze", "--config", "scalar_unstable"]) == 0
    out = capsys.readouterr().out
    assert "c_open           yes" in out
    assert cli.main(["analyze", "--config", "scalar_unstable", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["classification"]["verdicts"]["c_open"]["value"] == "yes"


def test_cli_analyze_writes_files(tmp_path):
    assert cli.main(["analyze", "--config", "heisenberg_hyperbolic", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "heisenberg_hyperbolic_analysis.json").read_text())
    assert data["decomposition"]["dims"]["g_zero"] == 1
    assert (tmp_path / "heisenberg_hyperbolic_analysis.txt").exists()


def test_cli_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["analyze", "--config", str(p)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_cli_missing_file(capsys):
    assert cli.main(["analyze", "--config", "/nonexistent/system.json"]) == 2


def test_cli_invalid_system(tmp_path):
    c = scalar_config()
    c["omega"] = {"box": [-1.0]}
    assert cli.main(["analyze", "--config", write(tmp_path, c)]) == 2


def test_cli_inconsistency_exit_code(monkeypatch):
    from liectrl.spectral import InconsistencyError

    def boom(cfg):
        raise InconsistencyError("forced", 1.0)

    monkeypatch.setattr(cli, "analyze", boom)
    assert cli.main(["analyze", "--config", "scalar_stable"]) == 3


def test_cli_simulate_closed_form(capsys):
    assert cli.main(["simulate", "--config", "scalar_unstable", "--control", "[[1.0, 1.0]]"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,x_1"
    t, x = map(float, lines[-1].split(","))
    assert t == pytest.approx(1.0) and abs(x - (np.e - 1)) < 1e-8


def test_cli_simulate_equilibrium(capsys):
    assert cli.main(["simulate", "--config", "heisenberg_hyperbolic", "--control", '[[1.0, [0, 0]]]', "--dt", "0.01"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert [float(v) for v in last.split(",")[1:]] == [0.0, 0.0, 0.0]


def test_cli_simulate_horizon_extends_last_segment(capsys):
    argv = ["simulate", "--config", "scalar_stable", "--control", '[{"duration": 0.5, "value": 1.0}]', "--horizon", "2"]
    assert cli.main(argv + ["--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["t"][-1] == pytest.approx(2.0)
    # the shipped control vector is -1, so x' = -x - u
    assert data["x"][-1][0] == pytest.approx(-(1 - np.exp(-2.0)), abs=1e-9)


def test_cli_simulate_from_file(tmp_path, capsys):
    script = tmp_path / "u.json"
    script.write_text("[[0.5, 1.0], [0.5, -1.0]]")
    assert cli.main(["simulate", "--config", "scalar_stable", "--control", str(script), "--x0", "0.25"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1002


def test_cli_simulate_divergence_exit_code(capsys):
    assert cli.main(["simulate", "--config", "scalar_unstable", "--control", "[[30.0, 1.0]]", "--dt", "0.01"]) == 4
    assert "safety box" in capsys.readouterr().err


@pytest.mark.parametrize(
    "script",
    ["[[1.0, 2.0]]", "[[1.0, [1, 0]]]", "[[-1.0, 1.0]]", "[]", "nope", "[[0.15, 1.0]]"],
)
def test_cli_simulate_bad_scripts(script):
    assert cli.main(["simulate", "--config", "scalar_unstable", "--control", script, "--dt", "0.1"]) == 2


def test_cli_reach_csv(tmp_path, capsys):
    cfg = write(tmp_path, scalar_config(-1.0))
    assert cli.main(["reach", "--config", cfg]) == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "axis bounds,cells,kind,horizon"
    assert lines[1] == "-3.0:3.0,61,reachable,4.0"
    assert "AGREE(closed): theory yes, grid yes" in captured.err


def test_cli_controlset_outputs_and_determinism(tmp_path):
    cfg = write(tmp_path, scalar_config(1.0))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["controlset", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["controlset", "--config", cfg, "--out", str(b), "--threads", "3"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["s_control_set.csv", "s_controllable.csv", "s_reachable.csv", "s_summary.json"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    summary = json.loads((a / "s_summary.json").read_text())
    assert "AGREE(open): theory yes, grid yes" in summary["cross_check_lines"]
    assert all(line.startswith("AGREE") for line in summary["cross_check_lines"])
    assert summary["set_identities"]["monotone"]


def test_cli_overrides(tmp_path, capsys):
    cfg = write(tmp_path, scalar_config(-1.0))
    argv = ["reach", "--config", cfg, "--cells", "31", "--horizon", "1.5", "--dwell", "0.05", "--format", "json"]
    assert cli.main(argv) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["reachable"]["cells_per_axis"] == [31]
    assert data["reachable"]["horizon"] == 1.5


def test_cli_rejects_bad_overrides(tmp_path):
    cfg = write(tmp_path, scalar_config(-1.0))
    assert cli.main(["reach", "--config", cfg, "--horizon", "-1"]) == 2
    assert cli.main(["reach", "--config", cfg, "--threads", "0"]) == 2
    assert cli.main(["analyze", "--config", cfg, "--format", "csv"]) == 2


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    assert capsys.readouterr().out.split() == SHIPPED


def test_log_level_from_environment(monkeypatch, capsys):
    import logging

    monkeypatch.setenv("LIECTRL_LOG", "debug")
    root = logging.getLogger()
    saved = root.handlers[:], root.level
    root.handlers = []
    try:
        cli._setup_logging()
        assert root.level == logging.DEBUG
    finally:
        root.handlers, level = saved
        root.setLevel(level)
