"""Maximal fields over the radius grid, the single-radius K^l average, and oracles.

All three operators sample radii ``r_k = k*h``. A point is *defined* for an
operator when at least one admissible radius survives the branch window;
undefined points carry value 0 and argmax 0 and are skipped by the checkers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .averages import (
    OperatorParams,
    ball_offsets,
    ball_weights,
    halfwidths,
    sphere_factors,
    sphere_tables,
)
from .errors import ConfigError
from .grid import DomainMask, ScalarField, require_same_grid, snap, unit_ball_volume
from .reports import CheckReport

KINDS = ("ball", "sphere", "k_l")

# Radii whose weighted averages agree to this relative tolerance count as tied.
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class MaximalField:
    values: ScalarField
    argmax_radius: np.ndarray
    defined: np.ndarray
    params: OperatorParams
    kind: str
    l: float | None = None

    @property
    def grid(self):
        return self.values.grid

    @property
    def argmax_index(self) -> np.ndarray:
        """Maximizing radius in grid cells (0 where undefined)."""
        return np.rint(self.argmax_radius / self.grid.spacing).astype(np.int64)

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "params": self.params.to_dict(), "grid": self.grid.to_dict()}
        if self.l is not None:
            meta["l"] = self.l
        meta["defined_points"] = int(self.defined.sum())
        return meta


@dataclass(frozen=True)
class KlParams:
    """Fraction ``l`` of the distance to the complement used as the single radius."""

    l: float
    base: OperatorParams = OperatorParams()

    def __post_init__(self):
        if not 0 < self.l < 1:
            raise ConfigError(f"l must lie in (0, 1), got {self.l}")


def _as2d(a: np.ndarray) -> np.ndarray:
    return a.reshape(1, -1) if a.ndim == 1 else a


def _finish(f: ScalarField, val, arg, params, kind, l=None) -> MaximalField:
    grid = f.grid
    val = val.reshape(grid.shape)
    arg = arg.reshape(grid.shape)
    defined = arg > 0
    defined.setflags(write=False)
    radius = arg * grid.spacing
    radius.setflags(write=False)
    return MaximalField(ScalarField(grid, val), radius, defined, params, kind, l)


def maximal_field(f: ScalarField, mask: DomainMask, params: OperatorParams) -> MaximalField:
    """Weighted ball-average maximal function of ``|f|`` over admissible radii."""
    require_same_grid(f.grid, mask.grid)
    grid = f.grid
    kmax = _as2d(mask.kmax)
    top = int(kmax.max())
    k_lo, k_hi = params.k_window(grid.spacing)
    k_hi = min(k_hi, top)
    prefix = _kernels.row_prefix(_as2d(np.abs(f.values)), grid.cell_volume)
    weights = ball_weights(grid, params, max(top, 1))
    val, arg = _kernels.ball_sweep_max(
        prefix, kmax, k_lo, k_hi, weights, halfwidths(max(top, 1)), grid.dim == 2, TIE_RTOL
    )
    return _finish(f, val, arg, params, "ball")


def spherical_maximal_field(f: ScalarField, mask: DomainMask, params: OperatorParams) -> MaximalField:
    """Weighted sphere-average maximal function of ``|f|`` over admissible radii."""
    require_same_grid(f.grid, mask.grid)
    grid = f.grid
    kmax = _as2d(mask.kmax)
    top = max(int(kmax.max()), 1)
    k_lo, k_hi = params.k_window(grid.spacing)
    k_hi = min(k_hi, top)
    factors = sphere_factors(grid, params, top)
    tables = sphere_tables(top) if grid.dim == 2 else sphere_tables(0)
    val, arg = _kernels.sphere_sweep_max(
        _as2d(np.abs(f.values)), kmax, k_lo, k_hi, factors, *tables, grid.dim == 2, TIE_RTOL
    )
    return _finish(f, val, arg, params, "sphere")


def k_l_radius_index(mask: DomainMask, l: float) -> np.ndarray:
    """Largest grid radius not exceeding ``l*sigma``; 0 where it is below ``h``
    or the ball would leave the box."""
    out = np.zeros(mask.grid.shape, dtype=np.int64)
    pos = mask.dist_sq > 0
    out[pos] = [int(math.floor(snap(l * math.sqrt(int(d))))) for d in mask.dist_sq[pos]]
    out[out > mask.kmax] = 0
    return out


def k_l_field(f: ScalarField, mask: DomainMask, klp: KlParams) -> MaximalField:
    """Single-radius weighted average of the signed ``f`` at ``r = l*sigma(x)``.

    The branch window of ``klp.base`` is applied to the evaluated radius.
    """
    require_same_grid(f.grid, mask.grid)
    grid = f.grid
    kpt = k_l_radius_index(mask, klp.l)
    k_lo, k_hi = klp.base.k_window(grid.spacing)
    kpt[(kpt < k_lo) | (kpt > k_hi)] = 0
    top = max(int(kpt.max()), 1)
    prefix = _kernels.row_prefix(_as2d(f.values), grid.cell_volume)
    sums = _kernels.ball_sums_at(prefix, _as2d(kpt), halfwidths(top), grid.dim == 2)
    weights = ball_weights(grid, klp.base, top)
    val = weights[_as2d(kpt)] * sums
    return _finish(f, val, kpt, klp.base, "k_l", klp.l)


# -- independent oracles -----------------------------------------------------------


def _shifted_ball_sums(values: np.ndarray, k: int, valid: np.ndarray, grid) -> np.ndarray:
    """Ball sums by explicit shift-and-add over every lattice offset."""
    out = np.zeros(values.shape)
    idx = np.argwhere(valid)
    for off in ball_offsets(grid, float(k * k)):
        src = idx + off
        out[tuple(idx.T)] += values[tuple(src.T)]
    return out * grid.cell_volume


def fractional_maximal_oracle(f: ScalarField, mask: DomainMask, beta: float,
                              normalization: str = "continuum") -> np.ndarray:
    """Local fractional maximal function without damping, by direct enumeration.

    ``sup_k r_k^beta / |B_k| * sum_{|y-x| < r_k} |f(y)| h^n``.
    """
    grid = f.grid
    n = grid.dim
    vals = np.abs(f.values)
    out = np.zeros(grid.shape)
    for k in range(1, int(mask.kmax.max()) + 1):
        valid = mask.kmax >= k
        r = k * grid.spacing
        sums = _shifted_ball_sums(vals, k, valid, grid)
        if normalization == "discrete":
            vol = len(ball_offsets(grid, float(k * k))) * grid.cell_volume
        else:
            vol = unit_ball_volume(n) * r**n
        out = np.where(valid, np.maximum(out, r**beta * sums / vol), out)
    return out


def hardy_littlewood_oracle(f: ScalarField, mask: DomainMask) -> np.ndarray:
    """Local centred maximal function via disk-footprint correlation."""
    grid = f.grid
    n = grid.dim
    vals = np.abs(f.values)
    out = np.zeros(grid.shape)
    for k in range(1, int(mask.kmax.max()) + 1):
        axes = np.meshgrid(*([np.arange(-k, k + 1)] * n), indexing="ij")
        foot = (sum(a * a for a in axes) < k * k).astype(float)
        sums = ndimage.correlate(vals, foot, mode="constant", cval=0.0) * grid.cell_volume
        avg = sums / (unit_ball_volume(n) * (k * grid.spacing) ** n)
        out = np.where(mask.kmax >= k, np.maximum(out, avg), out)
    return out


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    scale = np.where(b != 0, np.abs(b), 1.0)
    return float(np.max(np.abs(a - b) / scale))


def reduce_check(f: ScalarField, mask: DomainMask, params: OperatorParams,
                 tol: float = 1e-12) -> CheckReport:
    """Compare the damped operator at ``gamma=0`` (and ``beta=gamma=0``) to oracles.

    With ``gamma > 0`` in ``params`` the report also records whether the damped
    field stays below the undamped one everywhere.
    """
    require_same_grid(f.grid, mask.grid)
    inside = mask.kmax > 0
    base = params.with_(gamma=0.0, branch="all")
    m_beta = maximal_field(f, mask, base).values.values
    oracle_beta = fractional_maximal_oracle(f, mask, base.beta, base.normalization)
    err_beta = _rel_err(m_beta[inside], oracle_beta[inside])

    plain = base.with_(beta=0.0, normalization="continuum")
    m_plain = maximal_field(f, mask, plain).values.values
    oracle_plain = hardy_littlewood_oracle(f, mask)
    err_plain = _rel_err(m_plain[inside], oracle_plain[inside])

    values = {"fractional_rel_err": err_beta, "plain_rel_err": err_plain}
    failures = int(err_beta > tol) + int(err_plain > tol)
    checked = 2
    if params.gamma > 0:
        damped = maximal_field(f, mask, params.with_(branch="all")).values.values
        excess = float(np.max(damped[inside] - m_beta[inside])) if inside.any() else 0.0
        values["damping_excess"] = excess
        failures += int(excess > tol * max(1.0, float(np.max(m_beta))))
        checked += 1
    return CheckReport(
        check_id="reduction",
        passed=failures == 0,
        points_checked=int(inside.sum()),
        points_excluded=int(mask.inside.sum() - inside.sum()),
        max_violation=max(err_beta, err_plain) - tol,
        violated_fraction=failures / checked,
        tolerance={"relative": tol},
        values=values,
        params=params.to_dict(),
        grid=f.grid.to_dict(),
    )
