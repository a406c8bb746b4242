from __future__ import annotations

import json
import math

import pytest

from fracmax.reports import (
    SCHEMA_VERSION,
    SUMMARY_COLUMNS,
    CheckReport,
    SweepReport,
    dumps,
    fmt,
    suite_document,
    summary_table,
)


def _report(**kw):
    base = dict(check_id="corollary", passed=True, points_checked=10, max_violation=-0.5,
                violated_fraction=0.0, label="gamma=0", values={"c": math.inf, "d": math.nan},
                grid={"spacing": 0.1})
    base.update(kw)
    return CheckReport(**base)


def test_json_is_standard_and_sorted():
    text = _report().to_json()
    doc = json.loads(text)
    assert doc["values"] == {"c": "inf", "d": "nan"}
    assert list(doc) == sorted(doc)
    assert text == _report().to_json()


def test_violated_fraction_range():
    with pytest.raises(ValueError):
        _report(violated_fraction=1.5)


def test_round_trip_through_dict():
    r = _report(values={"x": 1.5}, notes=["a"])
    assert CheckReport.from_dict(json.loads(r.to_json())) == r


def test_floats_round_trip_exactly():
    x = 0.1 + 0.2
    assert json.loads(dumps({"x": x}))["x"] == x
    assert float(fmt(x)) == x
    assert fmt(True) == "true" and fmt(None) == "" and fmt(3) == "3"


def test_summary_table_layout():
    table = summary_table([_report(), _report(check_id="reduction", passed=False)])
    lines = table.splitlines()
    assert lines[0].split("\t") == list(SUMMARY_COLUMNS)
    row = dict(zip(SUMMARY_COLUMNS, lines[2].split("\t")))
    assert row["check_id"] == "reduction" and row["passed"] == "false" and float(row["h"]) == 0.1


def test_suite_document():
    doc = suite_document([_report(), _report(passed=False)], {"grid.dim": 1})
    assert doc["schema"] == SCHEMA_VERSION and doc["passed"] is False and len(doc["checks"]) == 2


def test_sweep_table():
    s = SweepReport("sweep", ["beta", "passed"], [{"beta": 1.0, "passed": True}, {"beta": 2.0}])
    assert s.to_table() == "beta\tpassed\n1\ttrue\n2\t\n"
    assert s.column("beta") == [1.0, 2.0]
    assert json.loads(s.to_json())["kind"] == "sweep"
