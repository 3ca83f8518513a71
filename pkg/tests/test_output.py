import json

import numpy as np
import pytest

from enclosure_recon import CARVED, RETAINED, EnclosureGrid
from output import format_value, voxel_rows, write_csv, write_json, write_vtk


@pytest.mark.parametrize("value, text", [
    (None, ""),
    (True, "true"),
    (np.bool_(False), "false"),
    (7, "7"),
    (np.int64(-3), "-3"),
    (0.1, "1.0000000000000001e-01"),
    (float("nan"), "nan"),
    (float("-inf"), "-inf"),
    ("M1", "M1"),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_csv_columns_and_order(tmp_path):
    rows = [{"mu": 8.0, "log_abs_I0": -30.5, "extra": 1}, {"mu": 16.0, "log_abs_I0": None}]
    path = write_csv(tmp_path / "a" / "t.csv", rows, ["mu", "log_abs_I0"])
    lines = path.read_text().splitlines()
    assert lines[0] == "mu,log_abs_I0"
    assert lines[1] == "8.0000000000000000e+00,-3.0500000000000000e+01"
    assert lines[2] == "1.6000000000000000e+01,"
    assert write_csv(tmp_path / "empty.csv", []).read_text() == "\n"


def test_json_is_deterministic_and_strict(tmp_path):
    data = {"b": np.float64(np.nan), "a": [np.int32(2), 1.5 - 2.0j], "c": np.array([1.0, np.inf]),
            "d": np.bool_(True)}
    first = write_json(tmp_path / "x.json", data).read_text()
    second = write_json(tmp_path / "y.json", dict(reversed(list(data.items())))).read_text()
    assert first == second
    loaded = json.loads(first)
    assert list(loaded) == ["a", "b", "c", "d"]
    assert loaded == {"a": [2, [1.5, -2.0]], "b": None, "c": [1.0, None], "d": True}


def _grid():
    state = np.zeros((2, 3, 4), dtype=np.int8)
    state[1, 0, 0] = RETAINED
    state[0, 2, 3] = CARVED
    return EnclosureGrid(np.array([-1.0, 0.0, 0.5]), 0.5, (2, 3, 4), state, np.full((2, 3, 4), np.nan))


def test_vtk_layout(tmp_path):
    lines = write_vtk(tmp_path / "g.vtk", _grid()).read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    assert lines[4] == "DIMENSIONS 2 3 4"
    assert lines[7] == "POINT_DATA 24"
    values = [int(v) for line in lines[10:] for v in line.split()]
    assert len(values) == 24
    # x varies fastest
    assert values[1] == RETAINED
    assert values[0 + 2 * 2 + 3 * 6] == CARVED


def test_voxel_rows_skip_outside():
    rows = list(voxel_rows(_grid()))
    assert len(rows) == 2
    assert rows[0] == {"i": 0, "j": 2, "k": 3, "x": -1.0, "y": 1.0, "z": 2.0, "state": CARVED}
    assert rows[1]["state"] == RETAINED
