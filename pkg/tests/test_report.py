import json
import math

import numpy as np
from hypothesis import given, strategies as st

from iotstab import report
from iotstab.scenario import NetworkScenario


def test_empty_result_header_only():
    text = report.csv_text(["a", "b"], [], {"tool": "iotstab"})
    assert text == "# tool=iotstab\na,b\n"
    cols, rows = report.read_csv(text)
    assert cols == ["a", "b"] and rows == []


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=6))
def test_single_row_roundtrip(values):
    cols = [f"c{i}" for i in range(len(values))]
    cols_back, rows = report.read_csv(report.csv_text(cols, [values]))
    assert cols_back == cols
    back = [float(v) for v in rows[0]]
    for x, y in zip(values, back):
        assert math.isclose(x, y, rel_tol=1e-11, abs_tol=0.0) or x == y


def test_cell_formatting():
    assert report.fmt(True) == "1"
    assert report.fmt(np.int64(3)) == "3"
    assert report.fmt(1 / 3) == "0.333333333333"
    assert report.fmt(float("nan")) == "nan"
    assert report.fmt(None) == ""


def test_json_is_deterministic_and_rounded():
    s = NetworkScenario.reference_defaults()
    obj = report.provenance(s, 7, x=np.float64(1 / 3), v=np.arange(3), bad=float("nan"))
    text = report.json_text(obj)
    assert text == report.json_text(report.provenance(s, 7, x=np.float64(1 / 3), v=np.arange(3), bad=float("nan")))
    data = json.loads(text)
    assert data["x"] == 0.333333333333 and data["v"] == [0, 1, 2] and data["bad"] is None
    assert data["scenario_hash"] == s.digest() and data["seed"] == 7


def test_row_width_checked():
    import pytest

    with pytest.raises(ValueError):
        report.csv_text(["a"], [(1, 2)])
