import json
import os

import numpy as np
import pytest

from acmax.cli import main
from acmax.fieldio import read_field

BASE = """
seed = 5

[geometry]
kind = "twisted"
half_dim = 2
points_per_axis = 8
twist = 0.3

[data]
type = "{dtype}"
{extra}

[outputs]
directory = "out"
formats = ["json", "binary-fields"]
"""


def _write(tmp_path, dtype="zero", extra="", name="run.toml"):
    p = tmp_path / name
    p.write_text(BASE.format(dtype=dtype, extra=extra))
    return p


def test_solve_zero_forcing(tmp_path):
    cfg = _write(tmp_path)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["b"]) <= 1e-10
    assert rep["schema_version"] == 1
    assert (out / "phi.bin").exists()
    assert (out / "residual.bin").exists()
    phi = read_field(out / "phi.bin")
    assert np.max(np.abs(phi.values)) <= 1e-10


def test_reports_are_deterministic(tmp_path):
    cfg = _write(tmp_path, dtype="trig",
                 extra='terms = [{k = [1, 0, 0, 0], amp = 0.05}]')
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "phi.bin").read_bytes() == (b / "phi.bin").read_bytes()
    # wall time lives in the sidecar, not the report
    assert "wall_time" in json.loads((a / "timing.json").read_text())
    assert "wall_time" not in (a / "report.json").read_text()


def test_flow_subcommand(tmp_path):
    cfg = _write(tmp_path, dtype="constant", extra="constant = 0.3")
    out = tmp_path / "o"
    assert main(["flow", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["b"] == pytest.approx(-0.3, abs=1e-9)
    assert rep["method"] == "flow"


def test_config_error_exit_code(tmp_path):
    cfg = _write(tmp_path)
    bad = tmp_path / "bad.toml"
    bad.write_text(cfg.read_text().replace("twist = 0.3", "twist = 1.5"))
    assert main(["solve", "--config", str(bad)]) == 1
    missing = tmp_path / "missing.toml"
    assert main(["solve", "--config", str(missing)]) == 1


def test_solver_error_exit_code_and_name(tmp_path, capsys):
    # an absurd forcing amplitude cannot stay in the positivity cone
    cfg = _write(tmp_path, dtype="trig",
                 extra='terms = [{k = [1, 0, 0, 0], amp = 40.0}]')
    code = main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert ("PathStalled" in err) or ("NotPositive" in err)


def test_grid_override_and_seed(tmp_path):
    cfg = _write(tmp_path)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out),
                 "--grid-N", "10", "--seed", "9"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["geometry"]["points_per_axis"] == 10
    assert rep["config"]["seed"] == 9


def test_gauduchon_subcommand(tmp_path):
    cfg = _write(tmp_path)
    out = tmp_path / "o"
    assert main(["gauduchon", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "gauduchon.json").read_text())
    assert rep["sup_u"] <= 1e-10
    assert rep["gauduchon_defect"] <= 1e-10
    assert (out / "u.bin").exists()


def test_verify_subcommand(tmp_path, monkeypatch):
    cfg = _write(tmp_path)
    out = tmp_path / "o"
    monkeypatch.setenv("ACMAX_THREADS", "2")
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["passed"]
    for key in ("eig_top_derivatives", "det_superadditivity",
                "wedge_j_identity", "j_squared_on_forms"):
        assert rep[key]["passed"]


def test_convergence_subcommand(tmp_path):
    cfg = _write(
        tmp_path, dtype="manufactured",
        extra='phi_star = [{k = [1, 0, 0, 0], amp = 0.2, kind = "sin"}, '
              '{k = [0, 0, 1, 0], amp = 0.2}]')
    out = tmp_path / "o"
    assert main(["convergence", "--config", str(cfg), "--out", str(out),
                 "--grid-N", "12"]) == 0
    rep = json.loads((out / "convergence.json").read_text())
    assert rep["observed_order"] >= 3.5
    assert rep["reference"] == "manufactured"
