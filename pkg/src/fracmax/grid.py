"""Uniform grids, sampled scalar fields, domain masks and the distance field.

Grids carry one spacing ``h`` shared by every axis. Field values are stored
as numpy arrays shaped like the grid with ``indexing="ij"``: ``values[i, j]``
lives at ``(origin[0] + i*h, origin[1] + j*h)``. Flattening is row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    ConfigError,
    EmptyDomainError,
    FullDomainError,
    GridMismatchError,
    NumericalError,
    RefinementError,
)

if TYPE_CHECKING:
    from .catalog import FunctionSpec

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}


def unit_ball_volume(n: int) -> float:
    return UNIT_BALL_VOLUME[n]


def snap(x: float, tol: float = 1e-9) -> float:
    """Round ``x`` to the nearest integer when it is within ``tol`` of it."""
    r = round(x)
    return float(r) if abs(x - r) <= tol * max(1.0, abs(x)) else x


@dataclass(frozen=True)
class GridSpec:
    dim: int
    shape: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(self.shape) != self.dim or len(self.origin) != self.dim:
            raise ConfigError("shape and origin must have one entry per axis")
        if min(self.shape) < 4:
            raise ConfigError("every axis needs at least 4 points")
        if not self.spacing > 0:
            raise ConfigError("spacing must be positive")

    @classmethod
    def uniform(cls, dim: int, n: int, lo: float = 0.0, hi: float = 1.0) -> GridSpec:
        """``n`` points per axis covering ``[lo, hi]`` on every axis."""
        return cls(dim, (n,) * dim, (hi - lo) / (n - 1), (lo,) * dim)

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + (s - 1) * self.spacing for o, s in zip(self.origin, self.shape))

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.spacing * np.arange(self.shape[a])

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays shaped like the grid."""
        return tuple(np.meshgrid(*(self.axis(a) for a in range(self.dim)), indexing="ij"))

    def point(self, index) -> np.ndarray:
        index = np.atleast_1d(index)
        return np.array([self.origin[a] + index[a] * self.spacing for a in range(self.dim)])

    def refined(self, factor: int) -> GridSpec:
        if factor < 2:
            raise RefinementError("refinement factor must be >= 2")
        shape = tuple((s - 1) * factor + 1 for s in self.shape)
        return GridSpec(self.dim, shape, self.spacing / factor, self.origin)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "shape": list(self.shape),
            "spacing": self.spacing,
            "origin": list(self.origin),
        }


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    source: FunctionSpec | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise NumericalError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def with_values(self, values: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, values)

    def abs(self) -> ScalarField:
        return ScalarField(self.grid, np.abs(self.values))

    def __add__(self, other: ScalarField) -> ScalarField:
        require_same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __mul__(self, c: float) -> ScalarField:
        source = None if self.source is None else self.source.scaled(float(c))
        return ScalarField(self.grid, self.values * c, source)

    __rmul__ = __mul__


def require_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# -- domain descriptors ------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Open box ``prod (lo_a, hi_a)``; in 1D this is an open interval."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def contains(self, coords) -> np.ndarray:
        inside = np.ones(coords[0].shape, dtype=bool)
        for c, a, b in zip(coords, self.lo, self.hi):
            inside &= (c > a) & (c < b)
        return inside

    def to_dict(self) -> dict:
        return {"shape": "box", "lo": list(self.lo), "hi": list(self.hi)}


def Interval(lo: float, hi: float) -> Box:
    return Box((float(lo),), (float(hi),))


@dataclass(frozen=True)
class Disk:
    center: tuple[float, ...]
    radius: float

    def contains(self, coords) -> np.ndarray:
        d2 = sum((c - x0) ** 2 for c, x0 in zip(coords, self.center))
        return d2 < self.radius**2

    def to_dict(self) -> dict:
        return {"shape": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, ...]
    inner: float
    outer: float

    def contains(self, coords) -> np.ndarray:
        d2 = sum((c - x0) ** 2 for c, x0 in zip(coords, self.center))
        return (d2 > self.inner**2) & (d2 < self.outer**2)

    def to_dict(self) -> dict:
        return {
            "shape": "annulus",
            "center": list(self.center),
            "inner": self.inner,
            "outer": self.outer,
        }


@dataclass(frozen=True, eq=False)
class ExplicitMask:
    inside: np.ndarray

    def contains(self, coords) -> np.ndarray:
        if self.inside.shape != coords[0].shape:
            raise GridMismatchError("explicit mask shape does not match the grid")
        return np.array(self.inside, dtype=bool)

    def to_dict(self) -> dict:
        return {"shape": "explicit"}


ShapeSpec = Union[Box, Disk, Annulus, ExplicitMask]


def shape_from_dict(d: dict) -> ShapeSpec:
    kind = d["shape"]
    if kind == "box":
        return Box(tuple(d["lo"]), tuple(d["hi"]))
    if kind == "disk":
        return Disk(tuple(d["center"]), float(d["radius"]))
    if kind == "annulus":
        return Annulus(tuple(d["center"]), float(d["inner"]), float(d["outer"]))
    raise ValueError(f"cannot rebuild domain descriptor {kind!r}")


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Inside flags, the distance field and the admissible radius bound.

    ``dist_sq`` is the squared distance, in index units, from each inside
    point to the nearest outside grid point. ``kmax`` is the largest integer
    ``k`` with ``k*k < dist_sq`` that also keeps a radius ``k*h`` sphere in
    the bounding box; the admissible radii at a point are ``k*h`` for
    ``1 <= k <= kmax``.
    """

    grid: GridSpec
    inside: np.ndarray
    sigma: np.ndarray
    dist_sq: np.ndarray
    kmax: np.ndarray
    shape_spec: ShapeSpec | None = None

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    def sigma_field(self) -> ScalarField:
        return ScalarField(self.grid, self.sigma)


def squared_index_distance(inside: np.ndarray) -> np.ndarray:
    """Exact squared index distance to the nearest ``False`` cell (0 outside)."""
    inside = np.asarray(inside, dtype=bool)
    if inside.all():
        raise FullDomainError("domain has no outside grid point")
    _, nearest = ndimage.distance_transform_edt(inside, return_indices=True)
    idx = np.indices(inside.shape)
    d2 = np.sum((nearest - idx) ** 2, axis=0).astype(np.int64)
    d2[~inside] = 0
    return d2


def squared_index_distance_bruteforce(inside: np.ndarray) -> np.ndarray:
    """O(N*M) oracle for :func:`squared_index_distance`."""
    inside = np.asarray(inside, dtype=bool)
    out_idx = np.argwhere(~inside)
    if len(out_idx) == 0:
        raise FullDomainError("domain has no outside grid point")
    d2 = np.zeros(inside.shape, dtype=np.int64)
    for p in np.argwhere(inside):
        d2[tuple(p)] = int(np.min(np.sum((out_idx - p) ** 2, axis=1)))
    return d2


def _edge_room(shape: tuple[int, ...]) -> np.ndarray:
    idx = np.indices(shape)
    room = None
    for a, n in enumerate(shape):
        r = np.minimum(idx[a], n - 1 - idx[a])
        room = r if room is None else np.minimum(room, r)
    return room


def _kmax(dist_sq: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    k = np.zeros(dist_sq.shape, dtype=np.int64)
    pos = dist_sq > 0
    # largest k with k^2 < d2, i.e. isqrt(d2 - 1)
    k[pos] = [math.isqrt(int(v) - 1) for v in dist_sq[pos]]
    return np.minimum(k, _edge_room(shape))


def mask_from_inside(grid: GridSpec, inside: np.ndarray, shape_spec: ShapeSpec | None = None) -> DomainMask:
    inside = np.asarray(inside, dtype=bool).reshape(grid.shape)
    if not inside.any():
        raise EmptyDomainError("domain contains no grid point")
    if inside.all():
        raise FullDomainError("domain has no outside grid point")
    d2 = squared_index_distance(inside)
    sigma = grid.spacing * np.sqrt(d2.astype(float))
    for arr in (inside, sigma, d2):
        arr.setflags(write=False)
    kmax = _kmax(d2, grid.shape)
    kmax.setflags(write=False)
    return DomainMask(grid, inside, sigma, d2, kmax, shape_spec)


def rasterize_domain(grid: GridSpec, shape_spec: ShapeSpec) -> DomainMask:
    inside = shape_spec.contains(grid.coords())
    keep = None if isinstance(shape_spec, ExplicitMask) else shape_spec
    return mask_from_inside(grid, inside, keep)


def distance_to_complement(mask: DomainMask) -> ScalarField:
    """Distance to the nearest outside grid point; 0 at outside points."""
    d2 = squared_index_distance(mask.inside)
    return ScalarField(mask.grid, mask.grid.spacing * np.sqrt(d2.astype(float)))


def distance_to_complement_bruteforce(mask: DomainMask) -> ScalarField:
    d2 = squared_index_distance_bruteforce(mask.inside)
    return ScalarField(mask.grid, mask.grid.spacing * np.sqrt(d2.astype(float)))


# -- refinement ----------------------------------------------------------------


def interpolate_to(values: np.ndarray, grid: GridSpec, new_grid: GridSpec) -> np.ndarray:
    """Multilinear interpolation of grid values onto another grid in the same box."""
    interp = RegularGridInterpolator(
        tuple(grid.axis(a) for a in range(grid.dim)), values, method="linear",
        bounds_error=False, fill_value=None,
    )
    pts = np.stack([c.ravel() for c in new_grid.coords()], axis=-1)
    return interp(pts).reshape(new_grid.shape)


def refine(obj, factor: int):
    """Refine a ScalarField or DomainMask onto a grid with spacing ``h/factor``."""
    if factor < 2:
        raise RefinementError("refinement factor must be >= 2")
    if isinstance(obj, DomainMask):
        if obj.shape_spec is None:
            raise RefinementError("mask built from an explicit boolean array cannot be refined")
        return rasterize_domain(obj.grid.refined(factor), obj.shape_spec)
    if isinstance(obj, ScalarField):
        new_grid = obj.grid.refined(factor)
        if obj.source is not None:
            from .catalog import sample_function

            return sample_function(new_grid, obj.source)
        return ScalarField(new_grid, interpolate_to(obj.values, obj.grid, new_grid))
    raise TypeError(f"cannot refine {type(obj).__name__}")


__all__ = [
    "Annulus",
    "Box",
    "Disk",
    "DomainMask",
    "ExplicitMask",
    "GridSpec",
    "Interval",
    "ScalarField",
    "UNIT_BALL_VOLUME",
    "distance_to_complement",
    "distance_to_complement_bruteforce",
    "mask_from_inside",
    "rasterize_domain",
    "refine",
    "require_same_grid",
    "snap",
    "unit_ball_volume",
]
