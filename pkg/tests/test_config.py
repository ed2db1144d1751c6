import json

import pytest

from acmax.config import (RunConfig, config_from_dict, config_to_dict,
                          emit_config, parse_config)
from acmax.errors import ConfigError
from acmax.geometries import GeometrySpec

TOML_SAMPLE = """
seed = 11

[geometry]
kind = "twisted"
half_dim = 2
points_per_axis = 16
twist = 0.3

[data]
type = "trig"
terms = [{k = [1, 0, 0, 0], amp = 0.1}, {k = [0, 0, 2, 0], amp = 0.05, kind = "sin"}]

[solver]
newton_tol = 1e-9
flow_stop_tol = 1e-6

[outputs]
directory = "results"
formats = ["json", "csv"]
"""


def test_parse_toml(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(TOML_SAMPLE)
    cfg = parse_config(p)
    assert cfg.seed == 11
    assert cfg.geometry.kind == "twisted"
    assert cfg.geometry.points_per_axis == 16
    assert cfg.data.type == "trig"
    assert cfg.data.terms[1]["kind"] == "sin"
    assert cfg.solver.newton_tol == 1e-9
    assert cfg.outputs.directory == "results"


def test_parse_json(tmp_path):
    cfg = config_from_dict({
        "geometry": {"kind": "flat", "half_dim": 1, "points_per_axis": 16},
        "seed": 2,
    })
    p = tmp_path / "run.json"
    p.write_text(json.dumps(config_to_dict(cfg)))
    back = parse_config(p)
    assert back == cfg


def test_emit_parse_roundtrip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(TOML_SAMPLE)
    cfg = parse_config(p)
    out = tmp_path / "echo.json"
    emit_config(cfg, out)
    again = parse_config(out)
    assert again == cfg


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat"}, "extra": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat", "spin": 3}})
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat"},
                          "solver": {"newton_tolerance": 1e-9}})


def test_validation_errors():
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "twisted", "twist": 1.5}})
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat"},
                          "data": {"type": "mystery"}})
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat"}, "seed": "abc"})
    with pytest.raises(ConfigError):
        config_from_dict({})
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"kind": "flat"},
                          "outputs": {"formats": ["xml"]}})


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/path.toml")


def test_default_construction():
    cfg = RunConfig(GeometrySpec(kind="flat"))
    assert cfg.data.type == "zero"
    assert cfg.solver.path == "continuity"
