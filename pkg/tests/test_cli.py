import json
from pathlib import Path

import pytest

from degrh.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    return code, out


def small_config(tmp_path, **extra):
    cfg = json.loads((CONFIGS / "example31_case1.json").read_text())
    cfg["numerics"] = {"M": 1024, "grid": {"nx": 9, "ny": 9}, "residual_grid": 9, "residual_boundary": 90}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_inspect_example(tmp_path):
    code, out = run(tmp_path, "inspect", "--config", str(CONFIGS / "example31_case1.json"))
    assert code == 0
    rep = json.loads((out / "inspect.json").read_text())
    assert len(rep["components"]) == 3
    assert rep["orbits_verified"] and rep["condition_P"]["pass"]
    assert rep["euler_characteristic"] == 2


def test_indices_example(tmp_path):
    code, out = run(tmp_path, "indices", "--config", str(CONFIGS / "example31_case1.json"))
    assert code == 0
    rep = json.loads((out / "indices.json").read_text())
    assert [c["kappa"] for c in rep["components"]] == [0, -1, 0]
    assert rep["solution_count_homogeneous"] == 2
    code, out = run(tmp_path, "indices", "--config", str(CONFIGS / "example31_case2.json"))
    rep = json.loads((out / "indices.json").read_text())
    assert [c["kappa"] for c in rep["components"]] == [0, -1, -1]


def test_mizohata_fails_condition_P(tmp_path):
    code, out = run(tmp_path, "inspect", "--config", str(CONFIGS / "mizohata.json"))
    assert code == 0
    assert not json.loads((out / "inspect.json").read_text())["condition_P"]["pass"]
    code, _ = run(tmp_path, "indices", "--config", str(CONFIGS / "mizohata.json"))
    assert code == 2


def test_input_errors(tmp_path):
    code, _ = run(tmp_path, "inspect", "--config", str(tmp_path / "missing.json"))
    assert code == 2
    code, out = run(tmp_path, "indices", "--config", small_config(tmp_path, Lambda="exp(i*theta"))
    assert code == 2
    assert not (out / "indices.json").exists()
    code, _ = run(tmp_path, "indices", "--config", small_config(tmp_path, domain="square"))
    assert code == 2


def test_period_exit_code(tmp_path):
    code, out = run(tmp_path, "solve", "--mode", "full", "--config", str(CONFIGS / "closed_orbit_period.json"))
    assert code == 3
    assert not out.exists() or not any(out.iterdir())


def test_solve_rh_outputs_are_deterministic(tmp_path):
    cfg = small_config(tmp_path)
    code, out = run(tmp_path, "solve", "--mode", "rh", "--config", cfg)
    assert code == 0
    rep = json.loads((out / "solve.json").read_text())
    assert [p["component"] for p in rep["poles"]] == [2]
    assert rep["residuals"]["boundary_sup"] < 1e-6
    for row in rep["orbit_values"]:
        assert row["sign"] == row["sign_predicted"]
    lines = (out / "solution.csv").read_text().splitlines()
    assert lines[0] == "x,y,re_u,im_u,mask" and len(lines) == 82
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} <= {"0", "1", "2"}
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    code, out2 = run(tmp_path / "again", "solve", "--mode", "rh", "--config", cfg)
    assert code == 0
    assert {p.name: p.read_bytes() for p in out2.iterdir()} == first


def test_solve_homogeneous(tmp_path):
    code, out = run(tmp_path, "solve", "--mode", "homogeneous", "--config", small_config(tmp_path))
    assert code == 0
    rep = json.loads((out / "solve.json").read_text())
    assert rep["solution_count"] == rep["solution_count_predicted"] == 2
    assert sorted(p.name for p in out.glob("basis_*.csv")) == ["basis_1.csv", "basis_2.csv"]
