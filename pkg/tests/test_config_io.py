import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavityspin.config import ConfigError, load_config, parse_config, resolve_grid
from cavityspin.io import dumps_json, format_table, read_table, to_jsonable, write_json, write_table

MINIMAL = {"params": {"g_coll_hz": 150e3, "kappa_hz": 660e3}, "superradiance": {"theta": 1.0}}


def test_minimal_superradiance_defaults():
    cfg = parse_config(MINIMAL, command="superradiance")
    assert cfg.experiment == "superradiance"
    assert cfg.seed == 0 and cfg.threads == 1 and cfg.output_dir == "out"
    sr = cfg.section("superradiance")
    assert sr["n_points"] == 2001 and sr["self_decay"] is True
    assert cfg.params.g_coll == pytest.approx(150e3)
    assert cfg.params.gamma_2 == pytest.approx(1 / (math.pi * 0.15))


def test_unknown_key_named():
    bad = {"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0, "detunning_hz": 3.0},
           "superradiance": {"theta": 1.0}}
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert "detunning_hz" in str(exc.value)
    assert exc.value.key == "params.detunning_hz"


def test_zero_kappa_cites_invariant():
    bad = {"params": {"g_coll_hz": 1.0, "kappa_hz": 0.0}, "superradiance": {"theta": 1.0}}
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert exc.value.key == "params"
    assert "kappa must be > 0" in str(exc.value)


@pytest.mark.parametrize("data,key", [
    ({"params": {"g_coll_hz": "x", "kappa_hz": 1.0}, "superradiance": {"theta": 1.0}},
     "params.g_coll_hz"),
    ({"params": {"kappa_hz": 1.0}, "superradiance": {"theta": 1.0}}, "params"),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "superradiance": {}}, "superradiance.theta"),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "superradiance": {"theta": []}},
     "superradiance.theta"),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "oat": {"theta": 1.0, "tau_s": 1e-5},
      "superradiance": {"theta": 1.0}}, None),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "superradiance": {"theta": 1.0},
      "seed": -1}, "seed"),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "superradiance": {"theta": 1.0},
      "threads": 0}, "threads"),
    ({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0}, "superradiance": {"theta": 1.0},
      "lineshape": {"strategy": "sobol"}}, "lineshape.strategy"),
])
def test_schema_errors(data, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert exc.value.key == key


def test_command_must_match():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, command="oat")


def test_sweep_empty_grid_rejected():
    data = dict(MINIMAL, sweep={"experiment": "superradiance", "parameter": "n0", "values": []})
    with pytest.raises(ConfigError, match="empty"):
        parse_config(data, command="sweep")
    data["sweep"]["values"] = {"start": 1.0, "stop": 2.0, "num": 0}
    with pytest.raises(ConfigError, match="empty"):
        parse_config(data, command="sweep")


def test_sweep_parameter_checked():
    data = dict(MINIMAL, sweep={"experiment": "superradiance", "parameter": "colour",
                                "values": [1.0]})
    with pytest.raises(ConfigError) as exc:
        parse_config(data, command="sweep")
    assert exc.value.key == "sweep.parameter"


def test_grids():
    np.testing.assert_allclose(resolve_grid({"start": 1.0, "stop": 100.0, "num": 3,
                                             "spacing": "log"}), [1.0, 10.0, 100.0])
    np.testing.assert_allclose(resolve_grid([3.0, 1.0]), [3.0, 1.0])
    cfg = parse_config({"params": {"g_coll_hz": 1.0, "kappa_hz": 1.0},
                        "superradiance": {"theta": 2}})
    assert cfg.section("superradiance")["theta"] == [2.0]


def test_load_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('seed = 5\n[params]\ng_coll_hz = 150e3\nkappa_hz = 660e3\n'
                    '[superradiance]\ntheta = 1.0\n')
    cfg = load_config(str(path))
    assert cfg.seed == 5
    json.dumps(to_jsonable(cfg.snapshot()))
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "missing.toml"))
    (tmp_path / "bad.toml").write_text("[params\n")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(str(tmp_path / "bad.toml"))


# ---- io ---------------------------------------------------------------------

@given(rows=st.lists(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=3,
                              max_size=3), min_size=1, max_size=20))
def test_table_round_trip_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("t") / "x.csv"
    data = np.array(rows)
    write_table(path, ["time", "a", "b"], ["s", "Hz", "1"], data)
    names, units, back = read_table(path)
    assert names == ["time", "a", "b"] and units == ["s", "Hz", "1"]
    np.testing.assert_array_equal(back, data)


def test_table_header_grammar():
    text = format_table(["t", "c"], ["s", "1"], [[0.1, 1.0]])
    lines = text.splitlines()
    assert lines[0] == "# columns: t,c"
    assert lines[1] == "# units: s,1"
    assert lines[2] == "0.10000000000000001,1"


def test_table_rejects_bad_labels():
    with pytest.raises(ValueError):
        format_table(["a,b"], ["1"], [[1.0]])
    with pytest.raises(ValueError):
        format_table(["a", "b"], ["1"], [[1.0, 2.0]])


def test_read_table_needs_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n")
    with pytest.raises(ValueError):
        read_table(p)


def test_json_conversion(tmp_path):
    obj = {"b": np.float64(math.inf), "a": np.arange(2), "c": 1 + 2j, "d": np.bool_(True)}
    text = dumps_json(obj)
    assert json.loads(text) == {"a": [0, 1], "b": "inf", "c": {"im": 2.0, "re": 1.0}, "d": True}
    assert text.index('"a"') < text.index('"b"')
    write_json(tmp_path / "x.json", obj)
    assert (tmp_path / "x.json").read_text() == text
