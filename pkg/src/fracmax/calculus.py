"""Finite-difference gradients, L^p and Sobolev norms, and integral identities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averages import ball_integral, ball_volume_discrete, sphere_integral
from .catalog import sample_gradient
from .errors import ConfigError, GeometryError
from .grid import DomainMask, GridSpec, ScalarField, require_same_grid, unit_ball_volume

RULES = ("sobolev", "shifted")


@dataclass(frozen=True, eq=False)
class GradientField:
    components: tuple[ScalarField, ...]
    magnitude: ScalarField
    defined: np.ndarray
    central: np.ndarray

    @classmethod
    def from_components(cls, comps, defined, central=None) -> GradientField:
        comps = tuple(comps)
        mag = np.sqrt(sum(c.values**2 for c in comps))
        central = defined if central is None else central
        return cls(comps, ScalarField(comps[0].grid, mag), defined, central)


def _support(where, grid: GridSpec) -> np.ndarray:
    if where is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(where, DomainMask):
        require_same_grid(where.grid, grid)
        return np.asarray(where.inside, dtype=bool)
    where = np.asarray(where, dtype=bool)
    if where.shape != grid.shape:
        raise ValueError("support array does not match the grid")
    return where


def weak_gradient(f: ScalarField, mask: DomainMask | np.ndarray | None = None) -> GradientField:
    """Difference quotients restricted to the support ``mask``.

    Central where both axis neighbours are in the support, one-sided where
    only one is, undefined (0) where neither is. ``central`` marks points at
    which every component used the central quotient.
    """
    grid = f.grid
    sup = _support(mask, grid)
    h = grid.spacing
    v = f.values
    comps = []
    defined = sup.copy()
    central = sup.copy()
    for a in range(grid.dim):
        fwd = np.zeros(grid.shape, dtype=bool)
        bwd = np.zeros(grid.shape, dtype=bool)
        d_fwd = np.zeros(grid.shape)
        d_bwd = np.zeros(grid.shape)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        pair = sup[lo] & sup[hi]
        fwd[lo] = pair
        bwd[hi] = pair
        diff = (v[hi] - v[lo]) / h
        d_fwd[lo] = diff
        d_bwd[hi] = diff
        both = fwd & bwd & sup
        comp = np.where(both, 0.5 * (d_fwd + d_bwd), np.where(fwd, d_fwd, np.where(bwd, d_bwd, 0.0)))
        has = (fwd | bwd) & sup
        comp = np.where(has, comp, 0.0)
        defined &= has
        central &= both
        comps.append(ScalarField(grid, comp))
    comps = [c.with_values(np.where(defined, c.values, 0.0)) for c in comps]
    return GradientField.from_components(comps, defined, central)


def analytic_gradient(f: ScalarField) -> GradientField | None:
    """Closed-form gradient when ``f`` came from the catalog, else None."""
    if f.source is None:
        return None
    comps = [ScalarField(f.grid, c) for c in sample_gradient(f.grid, f.source)]
    full = np.ones(f.grid.shape, dtype=bool)
    return GradientField.from_components(comps, full)


def gradient_magnitude(f: ScalarField, mask: DomainMask | None = None) -> ScalarField:
    """``|grad f|``: closed form for catalog functions, difference quotients otherwise."""
    g = analytic_gradient(f)
    if g is None:
        g = weak_gradient(f, mask)
    return g.magnitude


# -- norms --------------------------------------------------------------------------


def lp_norm(f: ScalarField, mask: DomainMask | np.ndarray | None, p: float, where=None) -> float:
    """``(sum |f|^p h^n)^(1/p)`` over the support (and ``where`` when given)."""
    if not p >= 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    sup = _support(mask, f.grid)
    if where is not None:
        sup = sup & np.asarray(where, dtype=bool)
    vals = np.abs(f.values[sup])
    if math.isinf(p):
        return float(vals.max()) if vals.size else 0.0
    return float(np.sum(vals**p) * f.grid.cell_volume) ** (1.0 / p)


def sobolev_norm(f: ScalarField, mask: DomainMask | np.ndarray | None, p: float,
                 gradient: GradientField | None = None, where=None) -> float:
    """``||f||_p + || |grad f| ||_p`` with the gradient taken on the support."""
    if gradient is None:
        gradient = weak_gradient(f, mask if mask is not None else None)
    sup = _support(mask, f.grid) & gradient.defined
    if where is not None:
        sup = sup & np.asarray(where, dtype=bool)
    return lp_norm(f, sup, p) + lp_norm(gradient.magnitude, sup, p)


@dataclass(frozen=True)
class NormParams:
    """Input exponent ``p`` and the target exponent ``q`` fixed by a rule.

    ``sobolev``: ``1/q = 1/p - beta/n``; ``shifted``: ``1/q = 1/p - (beta-1)/n``.
    """

    p: float
    beta: float
    n: int
    rule: str = "sobolev"

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if self.inverse_q <= 0:
            raise ConfigError(
                f"rule {self.rule} gives 1/q = {self.inverse_q} <= 0 for p={self.p}, beta={self.beta}, n={self.n}"
            )
        if self.q < self.p - 1e-12:
            raise ConfigError(f"rule {self.rule} gives q={self.q} below p={self.p}")

    @property
    def inverse_q(self) -> float:
        shift = self.beta if self.rule == "sobolev" else self.beta - 1.0
        return 1.0 / self.p - shift / self.n

    @property
    def q(self) -> float:
        return 1.0 / self.inverse_q

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "beta": self.beta, "n": self.n, "rule": self.rule}


# -- identities -----------------------------------------------------------------------


def _gradient_components(f: ScalarField) -> list[np.ndarray]:
    g = analytic_gradient(f)
    if g is None:
        g = weak_gradient(f)
    return [c.values for c in g.components]


def _radial_field(f: ScalarField, x, comps=None) -> ScalarField:
    """``grad f(y) . (y - x)`` sampled on the grid."""
    grid = f.grid
    comps = _gradient_components(f) if comps is None else comps
    center = grid.point(x)
    coords = grid.coords()
    out = sum(c * (y - x0) for c, y, x0 in zip(comps, coords, center))
    return ScalarField(grid, out)


def green_identity_residual(f: ScalarField, x, r: float) -> float:
    """``| r * int_{dB} f - int_B (n f + grad f . (y - x)) |`` with grid quadratures."""
    n = f.grid.dim
    lhs = r * sphere_integral(f, x, r)
    rhs = n * ball_integral(f, x, r) + ball_integral(_radial_field(f, x), x, r)
    return abs(lhs - rhs)


def sphere_ball_identity_residual(f: ScalarField, x, r: float) -> float:
    """``| avg_{dB} f - avg_B f - (1/n) avg_B grad f . (y - x) |``.

    Ball averages divide by the lattice volume of the ball, sphere averages by
    the surface measure ``n w_n r^(n-1)``.
    """
    grid = f.grid
    n = grid.dim
    area = n * unit_ball_volume(n) * r ** (n - 1)
    vol = ball_volume_discrete(grid, r)
    sphere_avg = sphere_integral(f, x, r) / area
    ball_avg = ball_integral(f, x, r) / vol
    radial_avg = ball_integral(_radial_field(f, x), x, r) / vol
    return abs(sphere_avg - ball_avg - radial_avg / n)


def radial_derivative_residual(f: ScalarField, x, radii=None, mask: DomainMask | None = None) -> float:
    """Max over ``radii`` of ``| (I(r+h) - I(r-h)) / 2h - int_{dB(x,r)} f |``.

    ``I(r)`` is the ball integral. Default radii are 2h, 3h and the largest
    multiple of h leaving one cell of room inside the box (and inside
    ``mask`` when given).
    """
    grid = f.grid
    h = grid.spacing
    idx = np.atleast_1d(x)
    room = min(min(int(i), s - 1 - int(i)) for i, s in zip(idx, grid.shape))
    if mask is not None:
        room = min(room, int(mask.kmax[tuple(idx)]))
    if room < 4:
        raise GeometryError("radial derivative needs at least 4 cells of room")
    if radii is None:
        radii = [2 * h, 3 * h, (room - 1) * h]
    worst = 0.0
    for r in radii:
        deriv = (ball_integral(f, x, r + h) - ball_integral(f, x, r - h)) / (2 * h)
        worst = max(worst, abs(deriv - sphere_integral(f, x, r)))
    return worst


def hardy_quotient_integral(Mf, mask: DomainMask, q: float, where=None) -> float:
    """``sum (Mf / sigma)^q h^n`` over inside points where ``Mf`` is defined."""
    if not q > 0:
        raise ConfigError(f"q must be positive, got {q}")
    values = Mf.values.values if hasattr(Mf, "defined") else np.asarray(Mf.values)
    sup = np.asarray(mask.inside, dtype=bool) & (mask.sigma > 0)
    if hasattr(Mf, "defined"):
        sup &= Mf.defined
    if where is not None:
        sup &= np.asarray(where, dtype=bool)
    ratio = values[sup] / mask.sigma[sup]
    return float(np.sum(ratio**q) * mask.grid.cell_volume)


__all__ = [
    "GradientField",
    "NormParams",
    "analytic_gradient",
    "gradient_magnitude",
    "green_identity_residual",
    "hardy_quotient_integral",
    "lp_norm",
    "radial_derivative_residual",
    "sobolev_norm",
    "sphere_ball_identity_residual",
    "weak_gradient",
]
