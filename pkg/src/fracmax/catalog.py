"""Analytic test functions with closed-form gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, FracmaxError, UnknownFunctionError
from .grid import GridSpec, ScalarField

SMOOTH = ("constant", "linear", "sin_product", "gaussian", "polynomial")


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": _plain(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> FunctionSpec:
        return cls(d["name"], dict(d.get("params", {})))

    def scaled(self, c: float) -> FunctionSpec:
        return FunctionSpec("scaled", {"factor": c, "base": self.to_dict()})


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _vec(v, dim: int) -> list[float]:
    if np.isscalar(v):
        return [float(v)] * dim
    v = [float(x) for x in v]
    if len(v) != dim:
        raise ConfigError(f"expected {dim} components, got {len(v)}")
    return v


# Each entry maps (params, coords) -> (values, gradient components).
_Evaluator = Callable[[dict, tuple], tuple[np.ndarray, list[np.ndarray]]]


def _constant(p, xs):
    c = float(p.get("value", 1.0))
    return np.full(xs[0].shape, c), [np.zeros(xs[0].shape) for _ in xs]


def _linear(p, xs):
    a = _vec(p.get("slope", 1.0), len(xs))
    b = float(p.get("offset", 0.0))
    val = b + sum(ai * x for ai, x in zip(a, xs))
    return val, [np.full(xs[0].shape, ai) for ai in a]


def _sin_product(p, xs):
    amp = float(p.get("amplitude", 1.0))
    k = float(p.get("frequency", 1.0))
    lo = _vec(p.get("lo", 0.0), len(xs))
    length = float(p.get("length", 1.0))
    off = float(p.get("offset", 0.0))
    w = k * math.pi / length
    s = [np.sin(w * (x - a)) for x, a in zip(xs, lo)]
    c = [np.cos(w * (x - a)) for x, a in zip(xs, lo)]
    val = amp * np.prod(s, axis=0)
    grad = []
    for i in range(len(xs)):
        g = amp * w * c[i]
        for j in range(len(xs)):
            if j != i:
                g = g * s[j]
        grad.append(g)
    return off + val, grad


def _gaussian(p, xs):
    amp = float(p.get("amplitude", 1.0))
    ctr = _vec(p.get("center", 0.5), len(xs))
    w = float(p.get("width", 0.15))
    d = [x - c for x, c in zip(xs, ctr)]
    val = amp * np.exp(-sum(di**2 for di in d) / (2 * w * w))
    return val, [-val * di / (w * w) for di in d]


def _cone(p, xs):
    ctr = _vec(p.get("center", 0.5), len(xs))
    d = [x - c for x, c in zip(xs, ctr)]
    r = np.sqrt(sum(di**2 for di in d))
    safe = np.where(r > 0, r, 1.0)
    return r, [np.where(r > 0, di / safe, 0.0) for di in d]


def _polynomial(p, xs):
    dim = len(xs)
    default = [[1.0, [2] + [0] * (dim - 1)]]
    if dim == 2:
        default.append([1.0, [0, 2]])
    terms = p.get("terms", default)
    val = np.zeros(xs[0].shape)
    grad = [np.zeros(xs[0].shape) for _ in xs]
    for coef, exps in terms:
        exps = [int(e) for e in exps]
        val = val + coef * np.prod([x**e for x, e in zip(xs, exps)], axis=0)
        for i in range(dim):
            if exps[i] == 0:
                continue
            parts = [x ** (e - 1) * e if j == i else x**e for j, (x, e) in enumerate(zip(xs, exps))]
            grad[i] = grad[i] + coef * np.prod(parts, axis=0)
    return val, grad


def _scaled(p, xs):
    base = FunctionSpec.from_dict(p["base"])
    v, g = evaluate(base, xs)
    c = float(p["factor"])
    return c * v, [c * gi for gi in g]


CATALOG: dict[str, _Evaluator] = {
    "constant": _constant,
    "linear": _linear,
    "sin_product": _sin_product,
    "gaussian": _gaussian,
    "cone": _cone,
    "polynomial": _polynomial,
    "scaled": _scaled,
}

PARAMETERS: dict[str, tuple[str, ...]] = {
    "constant": ("value",),
    "linear": ("slope", "offset"),
    "sin_product": ("amplitude", "frequency", "lo", "length", "offset"),
    "gaussian": ("amplitude", "center", "width"),
    "cone": ("center",),
    "polynomial": ("terms",),
    "scaled": ("base", "factor"),
}


def evaluate(spec: FunctionSpec, coords) -> tuple[np.ndarray, list[np.ndarray]]:
    try:
        fn = CATALOG[spec.name]
    except KeyError:
        raise UnknownFunctionError(f"unknown function id {spec.name!r}") from None
    extra = sorted(set(spec.params) - set(PARAMETERS[spec.name]))
    if extra:
        raise ConfigError(f"function {spec.name!r} takes no parameter(s) {', '.join(extra)}")
    try:
        val, grad = fn(spec.params, tuple(np.asarray(c, dtype=float) for c in coords))
    except FracmaxError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad parameters for function {spec.name!r}: {exc!r}") from None
    return np.broadcast_to(val, np.shape(coords[0])).astype(float), grad


def sample_function(grid: GridSpec, spec: FunctionSpec) -> ScalarField:
    vals, _ = evaluate(spec, grid.coords())
    return ScalarField(grid, vals, source=spec)


def sample_gradient(grid: GridSpec, spec: FunctionSpec) -> list[np.ndarray]:
    _, grad = evaluate(spec, grid.coords())
    return [np.broadcast_to(g, grid.shape).astype(float) for g in grad]


def default_battery(dim: int, lo: float = 0.0, hi: float = 1.0) -> list[FunctionSpec]:
    """Smooth nonnegative functions adapted to the box ``[lo, hi]^dim``."""
    length = hi - lo
    mid = (lo + hi) / 2
    return [
        FunctionSpec("constant", {"value": 1.0}),
        FunctionSpec("linear", {"slope": [1.0 / length] * dim, "offset": 1.0 - dim * lo / length}),
        FunctionSpec("sin_product", {"lo": lo, "length": length}),
        FunctionSpec("gaussian", {"center": [mid] * dim, "width": 0.15 * length}),
        FunctionSpec(
            "polynomial",
            {"terms": [[1.0 / length**2, [2] + [0] * (dim - 1)]]
             + ([[1.0 / length**2, [0, 2]]] if dim == 2 else [])},
        ),
    ]
