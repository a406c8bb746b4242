"""Plain-text field and mask files.

Layout, one item per line::

    fracmax-field 1
    kind field|mask
    dim 2
    shape 64 64
    spacing 0.015625
    origin 0 0
    source {...}            (optional, one-line JSON function descriptor)
    domain {...}            (optional, one-line JSON shape descriptor)
    values                  (field)  |  inside ... sigma  (mask)
    <one grid row per line, whitespace separated>

Floats use ``%.17g`` so a write/read cycle reproduces every value exactly.
1D data occupies a single row.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .catalog import FunctionSpec
from .errors import FieldFormatError
from .grid import DomainMask, GridSpec, ScalarField, mask_from_inside, shape_from_dict

MAGIC = "fracmax-field 1"


def _num(x: float) -> str:
    return "%.17g" % x


def _block(values: np.ndarray, cell=_num) -> list[str]:
    rows = values.reshape(1, -1) if values.ndim == 1 else values
    return [" ".join(cell(v) for v in row) for row in rows]


def _header(kind: str, grid: GridSpec) -> list[str]:
    return [
        MAGIC,
        f"kind {kind}",
        f"dim {grid.dim}",
        "shape " + " ".join(str(s) for s in grid.shape),
        f"spacing {_num(grid.spacing)}",
        "origin " + " ".join(_num(o) for o in grid.origin),
    ]


def _compact(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def format_field(f: ScalarField) -> str:
    lines = _header("field", f.grid)
    if f.source is not None:
        lines.append("source " + _compact(f.source.to_dict()))
    lines.append("values")
    lines += _block(np.asarray(f.values, dtype=float))
    return "\n".join(lines) + "\n"


def format_mask(mask: DomainMask) -> str:
    lines = _header("mask", mask.grid)
    if mask.shape_spec is not None:
        lines.append("domain " + _compact(mask.shape_spec.to_dict()))
    lines.append("inside")
    lines += _block(mask.inside, lambda v: "1" if v else "0")
    lines.append("sigma")
    lines += _block(mask.sigma)
    return "\n".join(lines) + "\n"


def write_field(path, f: ScalarField) -> None:
    Path(path).write_text(format_field(f))


def write_mask(path, mask: DomainMask) -> None:
    Path(path).write_text(format_mask(mask))


class _Reader:
    def __init__(self, text: str):
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise FieldFormatError("unexpected end of field file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def keyed(self, key: str) -> str:
        line = self.next()
        name, _, rest = line.partition(" ")
        if name != key:
            raise FieldFormatError(f"expected '{key}', found '{line}'")
        return rest

    def block(self, shape: tuple[int, ...]) -> np.ndarray:
        rows, cols = (1, shape[0]) if len(shape) == 1 else shape
        out = np.empty((rows, cols))
        for i in range(rows):
            parts = self.next().split()
            if len(parts) != cols:
                raise FieldFormatError(f"row {i} has {len(parts)} values, expected {cols}")
            try:
                out[i] = [float(v) for v in parts]
            except ValueError as exc:
                raise FieldFormatError(f"row {i}: {exc}") from None
        return out.reshape(shape)


def _read_header(rd: _Reader) -> tuple[str, GridSpec]:
    if rd.next() != MAGIC:
        raise FieldFormatError("missing 'fracmax-field 1' header")
    kind = rd.keyed("kind")
    if kind not in ("field", "mask"):
        raise FieldFormatError(f"unknown kind {kind!r}")
    try:
        dim = int(rd.keyed("dim"))
        shape = tuple(int(s) for s in rd.keyed("shape").split())
        spacing = float(rd.keyed("spacing"))
        origin = tuple(float(o) for o in rd.keyed("origin").split())
    except ValueError as exc:
        raise FieldFormatError(f"bad header value: {exc}") from None
    if len(shape) != dim or len(origin) != dim:
        raise FieldFormatError("shape and origin must have dim entries")
    return kind, GridSpec(dim, shape, spacing, origin)


def _optional_json(rd: _Reader, key: str) -> dict | None:
    nxt = rd.peek()
    if nxt is not None and nxt.startswith(key + " "):
        return json.loads(rd.keyed(key))
    return None


def parse(text: str) -> ScalarField | DomainMask:
    rd = _Reader(text)
    kind, grid = _read_header(rd)
    if kind == "field":
        source = _optional_json(rd, "source")
        rd.keyed("values")
        values = rd.block(grid.shape)
        spec = FunctionSpec.from_dict(source) if source is not None else None
        out = ScalarField(grid, values, spec)
    else:
        domain = _optional_json(rd, "domain")
        rd.keyed("inside")
        inside = rd.block(grid.shape)
        if not np.isin(inside, (0.0, 1.0)).all():
            raise FieldFormatError("inside block must hold only 0 and 1")
        rd.keyed("sigma")
        sigma = rd.block(grid.shape)
        out = mask_from_inside(grid, inside > 0, shape_from_dict(domain) if domain else None)
        if not np.array_equal(out.sigma, sigma):
            raise FieldFormatError("sigma block disagrees with the inside block")
    if rd.peek() is not None:
        raise FieldFormatError(f"trailing content: {rd.peek()!r}")
    return out


def read(path) -> ScalarField | DomainMask:
    return parse(Path(path).read_text())
