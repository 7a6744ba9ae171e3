import json
import math

import numpy as np
import pytest

from loopbp.report import (
    error_marginals,
    error_z,
    error_z_ratio,
    table_csv,
    to_csv,
    to_json,
    z_error_section,
)


def test_error_z():
    assert error_z(1.5, 1.0) == 0.5
    with pytest.raises(ValueError):
        error_z(math.nan, 1.0)
    with pytest.raises(ValueError):
        error_z(1.0, math.inf)


def test_error_z_ratio():
    assert error_z_ratio(2.0, 4.0) == 0.5
    assert error_z_ratio(1.0, 0.0) is None


def test_error_marginals():
    a = np.array([[0.4, 0.6], [0.1, 0.9]])
    b = np.array([[0.5, 0.5], [0.1, 0.9]])
    assert error_marginals(a, b) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        error_marginals(a, b[:1])
    assert error_marginals(np.empty((0, 2)), np.empty((0, 2))) == 0.0


def test_z_error_section_invalid_estimate():
    sec = z_error_section(math.nan, 3.0)
    assert sec == {"error_z": None, "error_z_ratio": None, "valid": False}
    ok = z_error_section(2.0, 3.0)
    assert ok["valid"] is True and ok["error_z"] == 1.0


def test_json_is_canonical():
    a = to_json({"b": 1, "a": [np.float64(2.0), np.int32(3)]})
    b = to_json({"a": [2.0, 3], "b": 1})
    assert a == b
    assert a.endswith("\n")
    parsed = json.loads(a)
    assert parsed == {"a": [2.0, 3], "b": 1}


def test_json_nonfinite_becomes_null():
    parsed = json.loads(to_json({"x": math.inf, "y": math.nan, "z": -math.inf}))
    assert parsed == {"x": None, "y": None, "z": None}


def test_json_preserves_bool():
    parsed = json.loads(to_json({"flag": np.True_, "other": False, "n": 1}))
    assert parsed["flag"] is True
    assert parsed["other"] is False
    assert parsed["n"] == 1


def test_json_nested_arrays():
    arr = np.arange(6, dtype=float).reshape(3, 2)
    parsed = json.loads(to_json({"m": arr}))
    assert parsed["m"] == [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]


def test_csv_flattens_paths():
    text = to_csv({"bp": {"converged": True, "log_z": 1.25}, "tag": None})
    lines = text.strip().splitlines()
    assert lines[0] == "key,value"
    assert "bp.converged,true" in lines
    assert "bp.log_z,1.25" in lines
    assert "tag," in lines


def test_csv_indexes_lists():
    text = to_csv({"m": [[0.25, 0.75]]})
    assert "m.0.0,0.25" in text
    assert "m.0.1,0.75" in text


def test_table_csv_column_order():
    rows = [{"b": 2, "a": 1}, {"a": 3, "b": 4}]
    text = table_csv(rows, ["a", "b"])
    assert text.splitlines() == ["a,b", "1,2", "3,4"]
