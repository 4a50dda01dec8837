import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ballforest import cli
from ballforest.config import ConfigError, RunConfig, fixture_config
from ballforest.forest import TidyForest, verify_tidy
from ballforest.sampling import threads
from ballforest.serialize import csv_text, dumps, loads, read_json, write_json
from ballforest.sphere_net import SphericalNet, verify_net


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip_17_digits(x):
    assert loads(dumps({"x": x}))["x"] == x
    assert loads(dumps([x, 1]))[0] == x


def test_special_values_and_types():
    d = loads(dumps({"a": math.nan, "b": math.inf, "c": np.float64(0.1), "d": np.arange(3), "e": True,
                     "f": None, "g": 1 + 2j, "h": []}))
    assert math.isnan(d["a"]) and d["b"] == math.inf
    assert d["c"] == 0.1 and d["d"] == [0, 1, 2] and d["e"] is True and d["f"] is None
    assert d["g"] == [1.0, 2.0] and d["h"] == []
    assert dumps({"x": 0.1}) == '{\n "x": 0.10000000000000001\n}\n'
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_csv_text():
    assert csv_text(["a", "b"], [[0.5, 2]]) == "a,b\n0.5,2\n"


def write_fixture(tmp_path):
    from ballforest.fixtures import five_ball_forest
    write_json(tmp_path / "fixture5_forest.json", five_ball_forest().to_dict())
    write_json(tmp_path / "fixture5.json", fixture_config())
    return tmp_path / "fixture5.json"


def test_config_roundtrip(tmp_path):
    path = write_fixture(tmp_path)
    cfg = RunConfig.load(path)
    assert cfg.forest_file == tmp_path / "fixture5_forest.json"
    assert cfg.Z.kind == "line" and cfg.Z.coeffs[0] == 0.05
    again = RunConfig.from_dict(loads(dumps(cfg.to_dict())))
    assert again.compose_config() == cfg.compose_config()


@pytest.mark.parametrize("field,value", [
    ("lambda0", 1.5), ("lambda1", 0.2), ("eps", -1.0), ("J", 1.5), ("J", -1),
    ("Z", {"kind": "cubic"}), ("forest_file", 3), ("densities", {"z_grid": 2}), ("seeds", {"sampling": "x"}),
    ("bogus", 1), ("options", {"threshold": "loose"}),
])
def test_config_errors_name_the_field(field, value):
    d = fixture_config()
    d[field] = value
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(d)
    assert err.value.field.split(".")[0].split("[")[0] in (field, "Z")


def test_config_missing_field():
    d = fixture_config()
    del d["eps"]
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(d)
    assert err.value.field == "eps"


def test_net_build_and_verify(tmp_path, capsys):
    assert cli.main(["net", "build", "--n", "1", "--r", "0.75", "--out", str(tmp_path)]) == 0
    d = read_json(tmp_path / "net.json")
    assert set(d) == {"n", "t", "r", "constants", "families"}
    assert verify_net(SphericalNet.from_dict(d)).passed
    assert read_json(tmp_path / "net_report.json")["passed"] is True
    assert cli.main(["net", "verify", "--net", str(tmp_path / "net.json"), "--out", str(tmp_path)]) == 0
    # a net with a hole fails verification
    d["families"] = [[p for p in f if p[0] < 0.5] for f in d["families"]]
    write_json(tmp_path / "holed.json", d)
    assert cli.main(["net", "verify", "--net", str(tmp_path / "holed.json"), "--out", str(tmp_path)]) == 1


def test_forest_build_and_path_verify(tmp_path):
    assert cli.main(["forest", "build", "--n", "1", "--r1", "0.5", "--r2", "0.8", "--out", str(tmp_path)]) == 0
    fpath = tmp_path / "shell_0.5_0.8.json"
    assert verify_tidy(TidyForest.from_dict(read_json(fpath))).passed
    assert (tmp_path / "shell_0.5_0.8.csv").read_text().startswith("x1,x2,radius")
    assert cli.main(["forest", "verify", "--forest", str(fpath), "--out", str(tmp_path)]) == 0
    code = cli.main(["path", "verify", "--forest", str(fpath), "--claimed", "0.02176", "--h", "0.002",
                     "--out", str(tmp_path)])
    v = read_json(tmp_path / "verdict.json")
    assert code == 0 and v["verdict"] == "consistent"
    assert {"claimed", "measured", "h", "mode", "verdict", "seed"} <= set(v)
    rows = (tmp_path / "witness.csv").read_text().splitlines()
    assert rows[0] == "x1,x2" and len(rows) > 2


def test_path_verify_falsified_exit(tmp_path):
    cli.main(["forest", "build", "--out", str(tmp_path)])
    code = cli.main(["path", "verify", "--forest", str(tmp_path / "shell_0.5_0.8.json"), "--claimed", "1.0",
                     "--h", "0.01", "--out", str(tmp_path)])
    assert code == 1 and read_json(tmp_path / "verdict.json")["verdict"] == "FALSIFIED"


def test_shear_demo(tmp_path):
    assert cli.main(["shear", "demo", "--out", str(tmp_path)]) == 0
    d = read_json(tmp_path / "shear.json")
    assert {"frame", "psi", "tau", "margins", "translation_applied"} <= set(d)
    assert set(d["frame"]) == {"unitary", "shift"}
    assert d["margins"]["roundtrip_error"] < 1e-9


def test_compose_run_and_report(tmp_path):
    cfg = write_fixture(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["compose", "run", "--config", str(cfg), "--out", str(out)]) == 0
    rep = read_json(out / "report.json")
    assert rep["passed"] and rep["checks"]["identity_on_K"]
    header = (out / "clouds.csv").read_text().splitlines()[0]
    assert header == "Re z,Im z,Re w,Im w,stage"
    assert cli.main(["report", "--config", str(cfg), "--seq", str(out / "seq.json"), "--out", str(out)]) == 0
    assert read_json(out / "completeness.json")["consumed_crossings"] == 0


def test_compose_run_corrupted_forest(tmp_path):
    cfg = write_fixture(tmp_path)
    d = read_json(tmp_path / "fixture5_forest.json")
    d["balls"][1]["center"] = list(d["balls"][0]["center"])
    d["balls"][1]["center"][3] = 0.01  # same sphere, overlapping
    write_json(tmp_path / "fixture5_forest.json", d)
    assert cli.main(["compose", "run", "--config", str(cfg), "--out", str(tmp_path / "bad")]) == 1
    assert read_json(tmp_path / "bad" / "tidy_report.json")["passed"] is False


def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 2
    assert cli.main(["net", "build", "--n", "1"]) == 2
    assert cli.main(["net", "build", "--n", "1", "--r", "-1", "--out", str(tmp_path)]) == 2
    assert cli.main(["forest", "verify", "--forest", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["compose", "run", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    d = fixture_config()
    d["lambda1"] = 2.0
    write_json(tmp_path / "c.json", d)
    assert cli.main(["compose", "run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 2
    assert "lambda1" in capsys.readouterr().err


def test_threads_flag_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BALLFOREST_THREADS", "3")
    assert cli.main(["net", "build", "--n", "1", "--r", "1", "--out", str(tmp_path)]) == 0
    assert threads() == 3
    assert cli.main(["net", "build", "--n", "1", "--r", "1", "--threads", "2", "--out", str(tmp_path)]) == 0
    assert threads() == 2
    monkeypatch.setenv("BALLFOREST_THREADS", "many")
    assert cli.main(["net", "build", "--n", "1", "--r", "1", "--out", str(tmp_path)]) == 2
    assert cli.main(["net", "build", "--n", "1", "--r", "1", "--threads", "0", "--out", str(tmp_path)]) == 2
    cli.main(["net", "build", "--n", "1", "--r", "1", "--threads", "1", "--out", str(tmp_path)])


def test_thread_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["net", "build", "--n", "2", "--r", "1", "--threads", "1", "--out", str(a)])
    cli.main(["net", "build", "--n", "2", "--r", "1", "--threads", "2", "--out", str(b)])
    cli.main(["net", "build", "--n", "1", "--r", "1", "--threads", "1", "--out", str(tmp_path)])
    assert (a / "net_report.json").read_bytes() == (b / "net_report.json").read_bytes()
    assert (a / "net.json").read_bytes() == (b / "net.json").read_bytes()
