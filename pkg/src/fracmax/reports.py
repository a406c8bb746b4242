"""Check and sweep reports with deterministic JSON and tab-separated output.

JSON floats are written with Python's shortest round-trip repr; the summary
table uses ``%.17g``. Non-finite floats become the strings ``"inf"``,
``"-inf"`` and ``"nan"`` so the JSON stays standard.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = "fracmax.report/1"

SUMMARY_COLUMNS = (
    "check_id",
    "label",
    "passed",
    "points_checked",
    "points_excluded",
    "violated_fraction",
    "max_violation",
    "empirical_constant",
    "h",
)


def plain(v: Any) -> Any:
    """Convert numpy scalars, tuples and non-finite floats into JSON-ready values."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [plain(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def dumps(obj: Any) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt(v: Any) -> str:
    """Table cell: ``%.17g`` for floats, lowercase booleans, empty for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


@dataclass
class CheckReport:
    check_id: str
    passed: bool
    points_checked: int = 0
    points_excluded: int = 0
    max_violation: float = 0.0
    violated_fraction: float = 0.0
    empirical_constant: float | None = None
    label: str = ""
    tolerance: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.violated_fraction <= 1.0:
            raise ValueError("violated fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return plain(asdict(self))

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> CheckReport:
        return cls(**d)

    def summary_row(self) -> list[str]:
        row = self.to_dict()
        row["h"] = self.grid.get("spacing")
        return [fmt(row.get(c)) for c in SUMMARY_COLUMNS]


def summary_table(reports: list[CheckReport]) -> str:
    lines = ["\t".join(SUMMARY_COLUMNS)]
    lines += ["\t".join(r.summary_row()) for r in reports]
    return "\n".join(lines) + "\n"


@dataclass
class SweepReport:
    """Rows of a sweep or convergence study plus its overall verdict."""

    kind: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    passed: bool = True
    values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]

    def to_dict(self) -> dict:
        return plain(asdict(self))

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_table(self) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(fmt(r.get(c)) for c in self.columns) for r in self.rows]
        return "\n".join(lines) + "\n"


def suite_document(reports: list[CheckReport], config: dict) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "config": config,
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
    }
