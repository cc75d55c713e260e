import json

import numpy as np
import pytest

from mmaf_lab.basis import adapted_basis
from mmaf_lab.config import ConfigError, load_file, resolve
from mmaf_lab.core import MassPartition
from mmaf_lab.flow import GridSpec, simulate_driving, solve_flow
from mmaf_lab.io import (
    CSV_HEADER,
    read_csv,
    write_basis_json,
    write_csv,
    write_events_json,
    write_flow_csv,
    write_json,
    write_remainder_csv,
)
from mmaf_lab.remainder import remainder_map

GRID = GridSpec(1e-2, 1.0)


@pytest.fixture
def pair():
    p = MassPartition((0.4, 0.6))
    x = simulate_driving([0.0, 0.2], p, GRID, 4)
    return x, solve_flow([0.0, 0.2], x)


def test_csv_round_trip(tmp_path):
    rows = np.array([[0.1, 1 / 3], [np.inf, -2.5e-300]])
    path = write_csv(tmp_path / "a.csv", ["u", "v"], rows, comments=["note"])
    text = path.read_text().splitlines()
    assert text[0] == CSV_HEADER and text[1] == "# note"
    cols, data = read_csv(path)
    assert cols == ["u", "v"]
    assert np.array_equal(data, rows)


def test_flow_csv_is_exact(tmp_path, pair):
    _, y = pair
    cols, data = read_csv(write_flow_csv(tmp_path / "f.csv", y))
    assert cols == ["t", "block_1", "block_2"]
    assert np.array_equal(data[:, 1:].T, y.values)


def test_events_and_basis_json(tmp_path, pair):
    x, y = pair
    log = json.loads(write_events_json(tmp_path / "e.json", y).read_text())
    assert len(log["events"]) == len(y.events)
    assert log["masses"] == [0.4, 0.6]
    basis = json.loads(write_basis_json(tmp_path / "b.json", adapted_basis(y)).read_text())
    assert basis["vectors"][0]["values"] == [1.0, 1.0]


def test_remainder_csv(tmp_path, pair):
    x, y = pair
    z = remainder_map(y, x)
    path = write_remainder_csv(tmp_path / "r.csv", z)
    cols, data = read_csv(path)
    assert cols == ["k", "t", "xi"]
    assert data.shape[0] == sum(len(v) for v in z.paths.values())
    assert "tau" in path.read_text().splitlines()[1]


def test_json_is_deterministic_and_clean(tmp_path):
    obj = {"b": np.float64(np.nan), "a": np.arange(3), "c": np.bool_(True)}
    t1 = write_json(tmp_path / "1.json", obj).read_text()
    t2 = write_json(tmp_path / "2.json", dict(reversed(list(obj.items())))).read_text()
    assert t1 == t2
    assert json.loads(t1) == {"a": [0, 1, 2], "b": "nan", "c": True}


def test_resolve_defaults():
    cfg = resolve()
    assert cfg.coal_deadline == pytest.approx(0.8)
    assert cfg.probe_times == [0.25, 0.5, 0.9]
    assert cfg.rn_components == [1]


def test_overrides_beat_file(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("masses: [0.2, 0.3, 0.5]\ng: [0, 0.5, 1]\nseed: 3\nN: 100\n")
    cfg = resolve(load_file(f), {"seed": 9, "N": None})
    assert cfg.seed == 9 and cfg.N == 100
    assert cfg.rn_components == [1, 2]


def test_json_config(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"T": 2, "dt": 0.01}))
    cfg = resolve(load_file(f))
    assert cfg.T == 2.0 and cfg.coal_deadline == pytest.approx(1.6)


@pytest.mark.parametrize(
    "values, field",
    [
        ({"masses": [0.5, 0.6]}, "masses"),
        ({"g": [1.0, 0.0]}, "g"),
        ({"g": [0.0]}, "g"),
        ({"dt": 0.3}, "dt"),
        ({"N": 0}, "N"),
        ({"N": 2.5}, "N"),
        ({"eps": -1}, "eps"),
        ({"coal_deadline": 1.0}, "coal_deadline"),
        ({"probe_times": [0.5, 3.0]}, "probe_times[1]"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_config_errors_name_the_field(values, field):
    with pytest.raises(ConfigError) as info:
        resolve(values)
    assert info.value.field_path == field


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_file(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("[1, 2")
    with pytest.raises(ConfigError):
        load_file(bad)
