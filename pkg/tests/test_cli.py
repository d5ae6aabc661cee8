import json

import pytest

from mabuchi_lab.cli import run_command


def run(argv, capsys):
    code = run_command(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_functionals_command(tmp_path, capsys):
    code, out, err = run(["functionals", "--polytope", "P1",
                          "--potential", "guillemin", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "Ca = " in out and "S_bar = 4" in out
    payload = json.loads((tmp_path / "functionals.json").read_text())
    assert payload["calabi"] <= 1e-6
    assert payload["s_bar"] == 4.0


def test_battery_command(tmp_path, capsys):
    code, out, err = run(["battery", "--experiment", "thm12", "--polytope", "P1",
                          "--n", "3", "--seed", "7", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "all pass" in out
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "samples.csv").exists()
    assert (tmp_path / "plotdata").is_dir()


def test_solve_hcma_invalid_eps(tmp_path, capsys):
    code, out, err = run(["solve-hcma", "--polytope", "P1", "--T", "1",
                          "--eps", "-0.01", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "eps" in err


def test_invalid_config_aggregates(tmp_path, capsys):
    code, out, err = run(["battery", "--experiment", "nope", "--polytope", "Qx",
                          "--n", "0", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "polytope" in err
    assert "experiment" in err
    assert "n:" in err


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[run]\npolytope = P1\nexperiment = lemma43\nn = 2\nseed = 3\n")
    out1 = tmp_path / "o1"
    code, out, err = run(["battery", "--config", str(cfg), "--out", str(out1)], capsys)
    assert code == 0
    meta = json.loads((out1 / "report.json").read_text())
    assert meta["experiment"] == "lemma43"
    # flags win over the file
    out2 = tmp_path / "o2"
    code, out, err = run(["battery", "--config", str(cfg),
                          "--experiment", "thm12", "--out", str(out2)], capsys)
    assert code == 0
    meta = json.loads((out2 / "report.json").read_text())
    assert meta["experiment"] == "thm12"


def test_out_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MABUCHI_LAB_OUT", str(tmp_path / "envout"))
    code, out, err = run(["futaki", "--polytope", "PF1", "--direction", "x"], capsys)
    assert code == 0
    payload = json.loads((tmp_path / "envout" / "futaki.json").read_text())
    assert payload["futaki"] == pytest.approx(4 / 9, abs=1e-5)
    assert abs(payload["oracle_gap"]) < 1e-5


def test_custom_facet_polytope(tmp_path, capsys):
    code, out, err = run(["functionals",
                          "--polytope", "1 0 0; 0 1 0; -1 -1 -1",
                          "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "S_bar = 12" in out


def test_ray_command(tmp_path, capsys):
    code, out, err = run(["ray", "--polytope", "PF1", "--direction", "x",
                          "--t-max", "8", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "yen" in out
    trace = (tmp_path / "ray_trace.csv").read_text().splitlines()
    assert trace[1].split(",")[:4] == ["t", "Ca", "yen_integrand", "t2Ca"]
