"""Kernel weights, ball and sphere quadrature, and the prefix-sum fast path.

Balls are open: a grid point ``y`` belongs to ``B(x, r)`` iff ``|y - x| < r``.
Membership is decided in index units on the squared distance, and radii that
are within rounding of a multiple of ``h`` are snapped onto it, so the fast
path and the direct oracle always agree on which points they sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import ConfigError, GeometryError
from .grid import GridSpec, ScalarField, snap, unit_ball_volume

BRANCHES = ("all", "small", "large")
NORMALIZATIONS = ("continuum", "discrete")


@dataclass(frozen=True)
class OperatorParams:
    """Fractional order, damping exponent and radius window.

    Admissible radii are the grid-aligned ``r_k = k*h`` with ``r_k < sigma(x)``,
    further restricted to ``(0, 1)`` by ``branch="small"`` and to ``[1, sigma)``
    by ``branch="large"``. ``normalization="discrete"`` divides by the lattice
    volume of the ball instead of ``w_n r^n``; the damping factor keeps the
    continuum measure in both modes.
    """

    beta: float = 0.0
    gamma: float = 0.0
    branch: str = "all"
    normalization: str = "continuum"

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.branch not in BRANCHES:
            raise ConfigError(f"branch must be one of {BRANCHES}, got {self.branch!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")

    def with_(self, **kw) -> OperatorParams:
        return replace(self, **kw)

    def in_definition_range(self, n: int) -> bool:
        return 0 <= self.beta < n

    def k_window(self, h: float) -> tuple[int, int]:
        """Inclusive range of radius indices allowed by the branch."""
        big = 1 << 40
        one = snap(1.0 / h)
        # smallest k with k*h >= 1
        k_one = int(one) if one == int(one) else int(math.floor(one)) + 1
        if self.branch == "small":
            return 1, k_one - 1
        if self.branch == "large":
            return max(k_one, 1), big
        return 1, big

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "gamma": self.gamma,
            "branch": self.branch,
            "normalization": self.normalization,
        }


def _check_radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    return r


def ball_kernel_weight(r, params: OperatorParams, n: int):
    """Multiplier of the ball integral: ``r^b (1+r^n)^(g b/n) / ((1+w r^n)^g w r^n)``."""
    r = _check_radius(r)
    b, g = params.beta, params.gamma
    vol = unit_ball_volume(n) * r**n
    out = r**b * (1 + r**n) ** (g * b / n) / ((1 + vol) ** g * vol)
    return float(out) if out.ndim == 0 else out


def sphere_kernel_weight(r, params: OperatorParams, n: int):
    """Multiplier of the sphere integral, with ``|dB| = n w_n r^(n-1)``."""
    r = _check_radius(r)
    b, g = params.beta, params.gamma
    area = n * unit_ball_volume(n) * r ** (n - 1)
    out = r**b * (1 + r**n) ** (g * b / n) / ((1 + area) ** g * area)
    return float(out) if out.ndim == 0 else out


# -- ball quadrature -----------------------------------------------------------


def _as2d(values: np.ndarray) -> np.ndarray:
    return values.reshape(1, -1) if values.ndim == 1 else values


def _index2d(grid: GridSpec, x) -> tuple[int, int]:
    x = tuple(int(v) for v in np.atleast_1d(x))
    if len(x) != grid.dim:
        raise ValueError("point index must have one entry per axis")
    for v, s in zip(x, grid.shape):
        if not 0 <= v < s:
            raise IndexError(f"point {x} outside grid of shape {grid.shape}")
    return (0, x[0]) if grid.dim == 1 else x


def _radius_index_sq(grid: GridSpec, r: float) -> float:
    if r <= 0:
        raise ValueError("radius must be positive")
    return snap(r / grid.spacing) ** 2


def _require_in_box(grid: GridSpec, x, rr: float) -> None:
    R = math.sqrt(rr)
    for v, s in zip(np.atleast_1d(x), grid.shape):
        if v - R < -1e-9 or v + R > s - 1 + 1e-9:
            raise GeometryError(f"radius {R}h around index {tuple(np.atleast_1d(x))} leaves the box")


def _largest_below(rem: float) -> int:
    """Largest integer ``w >= 0`` with ``w*w < rem`` (``rem > 0``)."""
    w = max(int(math.ceil(math.sqrt(rem))) - 1, 0)
    while (w + 1) * (w + 1) < rem:
        w += 1
    while w > 0 and w * w >= rem:
        w -= 1
    return w


def ball_rows(grid: GridSpec, rr: float) -> list[tuple[int, int]]:
    """``(row offset, half width)`` pairs covering the open ball of squared radius ``rr``."""
    if grid.dim == 1:
        return [(0, _largest_below(rr))]
    amax = _largest_below(rr)
    return [(a, _largest_below(rr - a * a)) for a in range(-amax, amax + 1)]


class PrefixTable:
    """Running sums of ``value * h^n`` along the last axis (one per row in 2D)."""

    def __init__(self, field: ScalarField):
        self.grid = field.grid
        self.prefix = _kernels.row_prefix(_as2d(field.values), field.grid.cell_volume)

    def segment(self, row: int, lo: int, hi: int) -> float:
        """Sum over columns ``lo..hi`` inclusive."""
        return float(_kernels.segment_sum(self.prefix, row, lo, hi + 1))

    def ball(self, x, r: float) -> float:
        rr = _radius_index_sq(self.grid, r)
        _require_in_box(self.grid, x, rr)
        i, j = _index2d(self.grid, x)
        return sum(self.segment(i + a, j - w, j + w) for a, w in ball_rows(self.grid, rr))


def ball_offsets(grid: GridSpec, rr: float) -> np.ndarray:
    """Integer offsets of the lattice points inside the open ball, one per row."""
    R = int(math.floor(math.sqrt(rr))) + 1
    axes = [np.arange(-R, R + 1)] * grid.dim
    offs = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    return offs[np.sum(offs**2, axis=1) < rr]


def ball_integral_direct(f: ScalarField, x, r: float) -> float:
    """Oracle: direct summation of ``f(y) h^n`` over grid points with ``|y - x| < r``."""
    grid = f.grid
    rr = _radius_index_sq(grid, r)
    _require_in_box(grid, x, rr)
    idx = np.asarray(np.atleast_1d(x)) + ball_offsets(grid, rr)
    return float(np.sum(f.values[tuple(idx.T)]) * grid.cell_volume)


def ball_integral(f: ScalarField, x, r: float, table: PrefixTable | None = None) -> float:
    """Midpoint quadrature of ``f`` over ``B(x, r)`` through row prefix sums."""
    table = table if table is not None else PrefixTable(f)
    return table.ball(x, r)


def ball_volume_discrete(grid: GridSpec, r: float) -> float:
    rr = _radius_index_sq(grid, r)
    return sum(2 * w + 1 for _, w in ball_rows(grid, rr)) * grid.cell_volume


def ball_average_weighted(f: ScalarField, x, r: float, params: OperatorParams) -> float:
    n = f.grid.dim
    integral = ball_integral(f.abs(), x, r)
    if params.normalization == "discrete":
        return discrete_ball_weight(r, params, f.grid) * integral
    return ball_kernel_weight(r, params, n) * integral


def discrete_ball_weight(r: float, params: OperatorParams, grid: GridSpec) -> float:
    n = grid.dim
    b, g = params.beta, params.gamma
    vol = unit_ball_volume(n) * r**n
    return r**b * (1 + r**n) ** (g * b / n) / ((1 + vol) ** g * ball_volume_discrete(grid, r))


# -- sphere quadrature -----------------------------------------------------------


def sphere_node_count(R: float) -> int:
    """Trapezoid nodes on a circle of radius ``R`` grid cells."""
    return max(16, int(math.ceil(2 * math.pi * R - 1e-9)))


def circle_offsets(R: float) -> np.ndarray:
    m = sphere_node_count(R)
    theta = 2 * math.pi * np.arange(m) / m
    return np.stack([R * np.cos(theta), R * np.sin(theta)], axis=-1)


def interpolate(values: np.ndarray, grid: GridSpec, pts_index: np.ndarray) -> np.ndarray:
    """Multilinear interpolation at fractional index positions (``(m, dim)``)."""
    pts = np.atleast_2d(pts_index)
    base = np.floor(pts).astype(np.int64)
    frac = pts - base
    out = np.zeros(len(pts))
    shape = np.array(grid.shape)
    for corner in np.ndindex(*(2,) * grid.dim):
        c = np.array(corner)
        idx = np.minimum(base + c, shape - 1)
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        out += w * values[tuple(idx.T)]
    return out


def sphere_integral(f: ScalarField, x, r: float) -> float:
    """Signed surface integral of ``f`` over ``dB(x, r)``.

    1D: ``f(x - r) + f(x + r)`` (counting measure). 2D: trapezoid rule on
    ``max(16, ceil(2 pi r / h))`` equally spaced angles with multilinear
    interpolation, each node weighted ``2 pi r / m``.
    """
    grid = f.grid
    rr = _radius_index_sq(grid, r)
    _require_in_box(grid, x, rr)
    R = math.sqrt(rr)
    x = np.asarray(np.atleast_1d(x), dtype=float)
    if grid.dim == 1:
        pts = np.array([[x[0] - R], [x[0] + R]])
        return float(np.sum(interpolate(f.values, grid, pts)))
    offs = circle_offsets(R)
    vals = interpolate(f.values, grid, x + offs)
    return float(2 * math.pi * R * grid.spacing / len(offs) * np.sum(vals))


def sphere_average_weighted(f: ScalarField, x, r: float, params: OperatorParams) -> float:
    return sphere_kernel_weight(r, params, f.grid.dim) * sphere_integral(f.abs(), x, r)


# -- tables for the compiled sweeps ------------------------------------------------


@lru_cache(maxsize=32)
def halfwidths(kmax: int) -> np.ndarray:
    return _kernels.halfwidth_table(max(kmax, 1))


@lru_cache(maxsize=32)
def sphere_tables(kmax: int):
    """Flattened bilinear stencils for integer radii ``1..kmax``."""
    starts = [0, 0]
    di0, fi, dj0, fj = [], [], [], []
    for k in range(1, kmax + 1):
        offs = circle_offsets(float(k))
        b = np.floor(offs).astype(np.int64)
        fr = offs - b
        di0.append(b[:, 0])
        dj0.append(b[:, 1])
        fi.append(fr[:, 0])
        fj.append(fr[:, 1])
        starts.append(starts[-1] + len(offs))
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt))
    return (
        np.array(starts, dtype=np.int64),
        cat(di0, np.int64),
        cat(fi, float),
        cat(dj0, np.int64),
        cat(fj, float),
    )


def ball_weights(grid: GridSpec, params: OperatorParams, kmax: int) -> np.ndarray:
    """Per-radius multipliers of the prefix ball sums (index 0 unused)."""
    w = np.zeros(kmax + 1)
    if kmax < 1:
        return w
    r = grid.spacing * np.arange(1, kmax + 1)
    if params.normalization == "continuum":
        w[1:] = ball_kernel_weight(r, params, grid.dim)
    else:
        hw = halfwidths(kmax)
        counts = np.array([_kernels.lattice_count(k, hw, grid.dim == 2) for k in range(1, kmax + 1)])
        n, b, g = grid.dim, params.beta, params.gamma
        vol = unit_ball_volume(n) * r**n
        w[1:] = r**b * (1 + r**n) ** (g * b / n) / ((1 + vol) ** g * counts * grid.cell_volume)
    return w


def sphere_factors(grid: GridSpec, params: OperatorParams, kmax: int) -> np.ndarray:
    """Per-radius multipliers of the raw sphere node sums (index 0 unused)."""
    w = np.zeros(kmax + 1)
    if kmax < 1:
        return w
    ks = np.arange(1, kmax + 1)
    r = grid.spacing * ks
    w[1:] = sphere_kernel_weight(r, params, grid.dim)
    if grid.dim == 2:
        m = np.array([sphere_node_count(float(k)) for k in ks])
        w[1:] *= 2 * math.pi * r / m
    return w


def ball_sums_all(f: ScalarField, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Ball integrals at radius ``k*h`` for every point whose ball fits the box.

    Returns ``(sums, valid)``.
    """
    grid = f.grid
    idx = np.indices(grid.shape)
    valid = np.ones(grid.shape, dtype=bool)
    for a, s in enumerate(grid.shape):
        valid &= (idx[a] >= k) & (idx[a] <= s - 1 - k)
    prefix = _kernels.row_prefix(_as2d(f.values), grid.cell_volume)
    sums = _kernels.ball_sums_fixed_k(prefix, k, halfwidths(k), grid.dim == 2, _as2d(valid))
    return sums.reshape(grid.shape), valid
