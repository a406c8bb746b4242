"""Checkers for the pointwise gradient inequalities, norm bounds and scalar bounds.

Every checker returns a :class:`CheckReport`. Pointwise inequalities are
tested as ``lhs <= rhs + slack`` with ``slack = c_abs + c_h * h`` at interior
points (distance to the complement at least ``margin_cells * h``) where the
operator and a central difference of it are defined. Points whose maximizing
radius jumps by more than ``switch_jump`` cells relative to an axis neighbour
are counted separately and left out, since the maximal field can have a kink
there; their violations are still tallied in ``switch_violations``. Only the
Sobolev gradient theorem also fails when they reach ``max_switch_fraction``.

Checks that need an unknown constant fit it as the largest observed ratio and
then ask that it moves by at most ``stability_factor`` under one refinement.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import _kernels
from .averages import (
    OperatorParams,
    PrefixTable,
    ball_integral_direct,
    ball_offsets,
    halfwidths,
)
from .calculus import (
    NormParams,
    gradient_magnitude,
    green_identity_residual,
    hardy_quotient_integral,
    lp_norm,
    radial_derivative_residual,
    sobolev_norm,
    sphere_ball_identity_residual,
    weak_gradient,
)
from .catalog import FunctionSpec, default_battery, sample_function
from .errors import ConfigError, EmptyAdmissibleSetError, ZeroNormError
from .grid import (
    Box,
    DomainMask,
    GridSpec,
    ScalarField,
    rasterize_domain,
    refine,
    require_same_grid,
    unit_ball_volume,
)
from .maximal import KlParams, MaximalField, k_l_field, maximal_field, spherical_maximal_field
from .reports import CheckReport, SweepReport

CHECK_IDS = (
    "scalar-bounds",
    "reduction",
    "fast-path",
    "thm-gradient-sobolev",
    "thm-gradient-lp",
    "kl-lemmas",
    "norm-bounds",
    "zero-boundary",
    "corollary",
)

NORM_BOUNDS = {
    # id: (operator, output norm, input norm, exponent rule)
    "maximal-lq": ("ball", "lq", "lp", "sobolev"),
    "spherical-lq": ("sphere", "lq", "lp", "sobolev"),
    "sobolev-embedding": ("ball", "w1q", "w1p", "sobolev"),
    "sobolev-finite-measure": ("ball", "w1q", "w1p", "shifted"),
    "lp-to-sobolev": ("ball", "w1q", "lp", "shifted"),
    "beta-zero-sobolev": ("ball", "w1q", "w1p", "sobolev"),
}

STUDIES = ("green-identity", "sphere-ball-identity", "radial-derivative", "lp-norm")


@dataclass(frozen=True)
class CheckConfig:
    """Tolerance model and refinement policy shared by the checkers.

    ``slack_h=None`` picks ``5 * (1 + max|f| + max|grad f|)`` per input.
    ``normalization`` selects how ball averages are normalized inside the
    checkers; the measure-consistent default keeps lattice-volume noise out of
    finite differences of the maximal fields.
    """

    slack_abs: float = 1e-9
    slack_h: float | None = None
    margin_cells: float = 3.0
    switch_jump: int = 2
    max_switch_fraction: float = 0.05
    stability_factor: float = 1.25
    hardy_drift: float = 0.10
    levels: int = 2
    normalization: str = "discrete"
    sobolev_embedding: bool | None = None
    seed: int = 0

    def __post_init__(self):
        if self.slack_abs < 0 or (self.slack_h is not None and self.slack_h < 0):
            raise ConfigError("slack coefficients must be >= 0")
        if self.margin_cells < 0:
            raise ConfigError("interior margin must be >= 0")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.stability_factor < 1:
            raise ConfigError("stability factor must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


# -- shared machinery -----------------------------------------------------------------


def _op(beta: float, gamma: float, branch: str, cfg: CheckConfig) -> OperatorParams:
    return OperatorParams(beta=beta, gamma=gamma, branch=branch, normalization=cfg.normalization)


def slack_for(f: ScalarField, mask: DomainMask, cfg: CheckConfig) -> dict:
    h = f.grid.spacing
    if cfg.slack_h is None:
        grad = gradient_magnitude(f, mask).values[mask.inside]
        c_h = 5.0 * (1.0 + float(np.max(np.abs(f.values[mask.inside]))) + float(np.max(grad)))
    else:
        c_h = cfg.slack_h
    return {"c_abs": cfg.slack_abs, "c_h": c_h, "h": h, "slack": cfg.slack_abs + c_h * h}


def switch_points(arg_index: np.ndarray, defined: np.ndarray, jump: int) -> np.ndarray:
    """Points whose maximizing radius differs by more than ``jump`` cells from
    a defined axis neighbour."""
    flag = np.zeros(arg_index.shape, dtype=bool)
    for a in range(arg_index.ndim):
        lo = [slice(None)] * arg_index.ndim
        hi = [slice(None)] * arg_index.ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        big = defined[lo] & defined[hi] & (np.abs(arg_index[hi] - arg_index[lo]) > jump)
        flag[lo] |= big
        flag[hi] |= big
    return flag


@dataclass
class _Pointwise:
    """Evaluation set and left-hand side of a gradient inequality."""

    lhs: np.ndarray
    points: np.ndarray
    switch: np.ndarray
    candidates: int

    @property
    def switch_fraction(self) -> float:
        return float(self.switch.sum()) / self.candidates if self.candidates else 0.0


def _gradient_lhs(field: MaximalField, mask: DomainMask, cfg: CheckConfig) -> _Pointwise:
    grad = weak_gradient(field.values, field.defined)
    interior = mask.inside & (mask.sigma >= cfg.margin_cells * mask.grid.spacing - 1e-12)
    cand = field.defined & grad.central & interior
    sw = switch_points(field.argmax_index, field.defined, cfg.switch_jump) & cand
    return _Pointwise(grad.magnitude.values, cand & ~sw, sw, int(cand.sum()))


def _empty(check_id: str, what: str):
    raise EmptyAdmissibleSetError(f"{check_id}: no interior point has an admissible {what}")


def _inequality_report(check_id: str, pw: _Pointwise, rhs: np.ndarray, tol: dict, cfg: CheckConfig,
                       grid: GridSpec, params: dict, values: dict, label: str = "",
                       notes: list | None = None, cap_switches: bool = False) -> CheckReport:
    """``cap_switches`` makes a switch fraction at or above ``max_switch_fraction``
    fail the check; otherwise switch points are only reported."""
    pts = pw.points
    n = int(pts.sum())
    if n == 0:
        _empty(check_id, "radius")
    excess = pw.lhs[pts] - rhs[pts] - tol["slack"]
    violated = int(np.sum(excess > 0))
    switch_ok = pw.switch_fraction < cfg.max_switch_fraction or not cap_switches
    sw = pw.switch
    values = dict(values)
    values.update({
        "switch_points": int(sw.sum()),
        "switch_fraction": pw.switch_fraction,
        "switch_violations": int(np.sum(pw.lhs[sw] - rhs[sw] - tol["slack"] > 0)),
        "max_lhs": float(np.max(pw.lhs[pts])),
        "min_margin": float(np.min(rhs[pts] - pw.lhs[pts])),
    })
    return CheckReport(
        check_id=check_id,
        label=label,
        passed=violated == 0 and switch_ok,
        points_checked=n,
        points_excluded=pw.candidates - n,
        max_violation=float(np.max(excess)),
        violated_fraction=violated / n,
        tolerance=tol,
        values=values,
        params=params,
        grid=grid.to_dict(),
        notes=list(notes or []),
    )


def _embedding_flag(mask: DomainMask, cfg: CheckConfig) -> tuple[bool, str]:
    if cfg.sobolev_embedding is not None:
        return cfg.sobolev_embedding, "set by configuration"
    if mask.shape_spec is not None and type(mask.shape_spec).__name__ in ("Box", "Disk"):
        return True, "boxes and disks are extension domains; flag set by assumption, not verified"
    return False, "no embedding assumption for this domain"


def gradient_hypotheses(n: int, beta: float, gamma: float, branch: str) -> bool:
    """Whether some ``1 < p < n`` admits ``1 <= beta < n/p`` (and ``gamma <= n`` on small radii)."""
    ok = n >= 2 and 1 <= beta < n
    if branch in ("small", "all"):
        ok = ok and 0 <= gamma <= n
    return ok


def _refinements(f: ScalarField, mask: DomainMask, levels: int):
    out = [(f, mask)]
    for _ in range(levels - 1):
        f, mask = refine(f, 2), refine(mask, 2)
        out.append((f, mask))
    return out


def _stable(values: list[float], factor: float) -> tuple[bool, float]:
    """Largest over smallest of consecutive values; ``0/0`` counts as stable."""
    worst = 1.0
    for a, b in zip(values, values[1:]):
        if not (math.isfinite(a) and math.isfinite(b)):
            return False, math.inf
        lo, hi = min(a, b), max(a, b)
        if hi == 0:
            continue
        worst = max(worst, hi / lo if lo > 0 else math.inf)
    return worst <= factor, worst


def _branch_rhs(branch: str, small: np.ndarray, large: np.ndarray, combine) -> np.ndarray:
    if branch == "small":
        return small
    if branch == "large":
        return large
    return combine(small, large)


# -- Theorem: pointwise gradient bound for Sobolev inputs ------------------------------------


def check_thm_gradient_sobolev(f: ScalarField, mask: DomainMask, beta: float, gamma: float,
                               branch: str = "all", cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """``|grad M_b f| <= (g n + 2b) M_{b-1} f + 2 M_b |grad f|`` on radii below 1 and
    ``(g n + b) M_b f + 2 M_b |grad f|`` on radii from 1 up.

    With ``branch="all"`` the larger of the two right-hand sides is used.
    """
    require_same_grid(f.grid, mask.grid)
    if beta < 1:
        raise ConfigError("the Sobolev gradient bound needs beta >= 1")
    n = f.grid.dim
    params = _op(beta, gamma, branch, cfg)
    M = maximal_field(f, mask, params)
    if not M.defined.any():
        _empty("thm-gradient-sobolev", f"{branch} radius")
    M_prev = maximal_field(f, mask, params.with_(beta=beta - 1))
    grad_f = gradient_magnitude(f, mask)
    M_grad = maximal_field(grad_f, mask, params)
    m, mp, mg = M.values.values, M_prev.values.values, M_grad.values.values
    small = (gamma * n + 2 * beta) * mp + 2 * mg
    large = (gamma * n + beta) * m + 2 * mg
    rhs = _branch_rhs(branch, small, large, np.maximum)
    pw = _gradient_lhs(M, mask, cfg)
    tol = slack_for(f, mask, cfg)
    emb, why = _embedding_flag(mask, cfg)
    values = {
        "hypotheses_satisfied": gradient_hypotheses(n, beta, gamma, branch),
        "sobolev_embedding_flag": emb,
    }
    if gamma == 0 and pw.points.any():
        # tighter bound quoted from earlier work; recorded, never asserted
        prior = beta * mp + 2 * mg
        pts = pw.points
        values["prior_bound_violated_fraction"] = float(
            np.mean(pw.lhs[pts] - prior[pts] - tol["slack"] > 0))
    return _inequality_report(
        "thm-gradient-sobolev", pw, rhs, tol, cfg, f.grid,
        {**params.to_dict(), "function": _source(f)}, values,
        label=f"beta={beta:g},gamma={gamma:g},branch={branch}", notes=[why], cap_switches=True,
    )


def _source(f: ScalarField):
    return f.source.to_dict() if f.source is not None else None


# -- Theorem: gradient bound for L^p inputs, unknown constant --------------------------------


def _lp_constant(f: ScalarField, mask: DomainMask, beta: float, gamma: float, branch: str,
                 cfg: CheckConfig) -> dict:
    params = _op(beta, gamma, branch, cfg)
    M = maximal_field(f, mask, params)
    if not M.defined.any():
        _empty("thm-gradient-lp", f"{branch} radius")
    pw = _gradient_lhs(M, mask, cfg)
    parts = {}
    if branch in ("small", "all"):
        p_prev = params.with_(beta=beta - 1)
        parts["small"] = (maximal_field(f, mask, p_prev).values.values
                          + spherical_maximal_field(f, mask, p_prev).values.values)
    if branch in ("large", "all"):
        parts["large"] = M.values.values + spherical_maximal_field(f, mask, params).values.values
    rhs = sum(parts.values())
    return _ratio_stats(pw, rhs, slack_for(f, mask, cfg))


def _ratio_stats(pw: _Pointwise, rhs: np.ndarray, tol: dict) -> dict:
    pts = pw.points
    if not pts.any():
        raise EmptyAdmissibleSetError("no interior point left for the ratio")
    lhs, r = pw.lhs[pts], rhs[pts]
    # left-hand sides at the absolute slack are rounding noise, not signal
    use = (r > 0) & (lhs > tol["c_abs"])
    structural = int(np.sum((r <= 0) & (lhs > tol["slack"])))
    c = float(np.max(lhs[use] / r[use])) if use.any() else 0.0
    return {"C": c, "points": int(pts.sum()), "excluded": pw.candidates - int(pts.sum()),
            "structural": structural, "switch_fraction": pw.switch_fraction, "tol": tol}


def check_thm_gradient_lp(f: ScalarField, mask: DomainMask, beta: float, gamma: float,
                          branch: str = "all", cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """Fit ``C`` in ``|grad M_b f| <= C (M_{b-1} f + S_{b-1} f)`` (radii below 1) or
    ``C (M_b f + S_b f)`` (radii from 1 up) and test its refinement stability.

    ``branch="all"`` sums both right-hand sides.
    """
    require_same_grid(f.grid, mask.grid)
    if beta < 1:
        raise ConfigError("the L^p gradient bound needs beta >= 1")
    levels = _refinements(f, mask, cfg.levels)
    stats = [_lp_constant(fi, mi, beta, gamma, branch, cfg) for fi, mi in levels]
    return _constant_report("thm-gradient-lp", stats, levels, cfg,
                            {**_op(beta, gamma, branch, cfg).to_dict(), "function": _source(f)},
                            label=f"beta={beta:g},gamma={gamma:g},branch={branch}",
                            hyp=_lp_hypotheses(f.grid.dim, beta, branch))


def _lp_hypotheses(n: int, beta: float, branch: str) -> bool:
    # needs p > n/(n-1) and beta below min(n - 2n/(p(n-1)), (n-1)/p) (+1 on small radii)
    if n < 2:
        return False
    shift = 1.0 if branch == "small" else 0.0
    ps = np.linspace(n / (n - 1) + 1e-6, 50, 20000)
    top = np.minimum(n - 2 * n / (ps * (n - 1)), (n - 1) / ps) + shift
    return bool(1 <= beta < np.max(top))


def _constant_report(check_id, stats, levels, cfg, params, label="", hyp=None, extra=None) -> CheckReport:
    cs = [s["C"] for s in stats]
    stable, worst = _stable(cs, cfg.stability_factor) if len(cs) > 1 else (True, 1.0)
    finite = all(math.isfinite(c) for c in cs)
    structural = sum(s["structural"] for s in stats)
    base = stats[0]
    values = {
        "constants": cs,
        "spacings": [lv[0].grid.spacing for lv in levels],
        "stability_ratio": worst,
        "stable": stable,
        "structural_violations": structural,
        "switch_fractions": [s["switch_fraction"] for s in stats],
    }
    if hyp is not None:
        values["hypotheses_satisfied"] = hyp
    values.update(extra or {})
    return CheckReport(
        check_id=check_id,
        label=label,
        passed=finite and stable and structural == 0,
        points_checked=base["points"],
        points_excluded=base["excluded"],
        max_violation=worst - cfg.stability_factor,
        violated_fraction=structural / max(sum(s["points"] for s in stats), 1),
        empirical_constant=max(cs),
        tolerance={**base["tol"], "stability_factor": cfg.stability_factor},
        values=values,
        params=params,
        grid=levels[0][0].grid.to_dict(),
    )


# -- K^l lemmas ----------------------------------------------------------------------------


def check_kl_lemmas(f: ScalarField, mask: DomainMask, klp: KlParams,
                    cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """Gradient bounds for the single-radius average ``K^l f``.

    The branch is read pointwise from the evaluated radius ``r = k h``: below 1
    the bound is ``(g n + 2b) M_{b-1} f + 2 M_b |grad f|``, from 1 up it is
    ``(g n + b) M_b f + 2 M_b |grad f|`` (asserted). The constant in
    ``|grad K^l f| <= C (M + S)`` with the matching order is fitted and tested
    for refinement stability.
    """
    require_same_grid(f.grid, mask.grid)
    beta, gamma = klp.base.beta, klp.base.gamma
    if beta < 1:
        raise ConfigError("the K^l gradient bounds need beta >= 1")
    levels = _refinements(f, mask, cfg.levels)
    first = None
    stats = []
    for i, (fi, mi) in enumerate(levels):
        out = _kl_level(fi, mi, klp, cfg)
        stats.append(out["stats"])
        if i == 0:
            first = out
    tol = first["tol"]
    pw = first["pw"]
    assert_report = _inequality_report(
        "kl-lemmas", pw, first["rhs"], tol, cfg, f.grid, {}, {})
    rep = _constant_report(
        "kl-lemmas", stats, levels, cfg,
        {**klp.base.to_dict(), "l": klp.l, "function": _source(f)},
        label=f"l={klp.l:g},beta={beta:g},gamma={gamma:g}",
        hyp=gradient_hypotheses(f.grid.dim, beta, gamma, "all"),
        extra={
            "small_points": first["n_small"],
            "large_points": first["n_large"],
            "pointwise_violations": round(assert_report.violated_fraction * assert_report.points_checked),
            "pointwise_max_violation": assert_report.max_violation,
            "pointwise_min_margin": assert_report.values["min_margin"],
        },
    )
    rep.passed = rep.passed and assert_report.passed
    rep.violated_fraction = assert_report.violated_fraction
    rep.max_violation = assert_report.max_violation
    rep.points_checked = assert_report.points_checked
    rep.points_excluded = assert_report.points_excluded
    return rep


def _kl_level(f, mask, klp, cfg) -> dict:
    n = f.grid.dim
    beta, gamma = klp.base.beta, klp.base.gamma
    base = _op(beta, gamma, "all", cfg)
    K = k_l_field(f, mask, KlParams(klp.l, base))
    if not K.defined.any():
        _empty("kl-lemmas", "radius l*sigma >= h")
    pw = _gradient_lhs(K, mask, cfg)
    prev = base.with_(beta=beta - 1)
    m = maximal_field(f, mask, base).values.values
    mp = maximal_field(f, mask, prev).values.values
    grad_f = gradient_magnitude(f, mask)
    mg = maximal_field(grad_f, mask, base).values.values
    s = spherical_maximal_field(f, mask, base).values.values
    sp = spherical_maximal_field(f, mask, prev).values.values
    is_small = K.argmax_radius < 1.0 - 1e-12
    rhs = np.where(is_small, (gamma * n + 2 * beta) * mp + 2 * mg, (gamma * n + beta) * m + 2 * mg)
    tol = slack_for(f, mask, cfg)
    stats = _ratio_stats(pw, np.where(is_small, mp + sp, m + s), tol)
    return {"pw": pw, "rhs": rhs, "tol": tol, "stats": stats,
            "n_small": int(np.sum(pw.points & is_small)),
            "n_large": int(np.sum(pw.points & ~is_small))}


# -- norm bounds ------------------------------------------------------------------------------


def _box_of(mask: DomainMask) -> tuple[float, float]:
    spec = mask.shape_spec
    if isinstance(spec, Box):
        return float(min(spec.lo)), float(max(spec.hi))
    g = mask.grid
    return g.origin[0], g.upper[0]


def norm_ratio(f: ScalarField, mask: DomainMask, bound_id: str, beta: float, gamma: float,
               norm: NormParams, cfg: CheckConfig = CheckConfig()) -> dict:
    """Output norm over input norm for one function."""
    op, out_kind, in_kind, _ = NORM_BOUNDS[bound_id]
    params = _op(beta, gamma, "all", cfg)
    field = (maximal_field if op == "ball" else spherical_maximal_field)(f, mask, params)
    p, q = norm.p, norm.q
    if in_kind == "lp":
        denom = lp_norm(f, mask, p)
    else:
        grad_f = gradient_magnitude(f, mask)
        denom = lp_norm(f, mask, p) + lp_norm(grad_f, mask, p)
    if denom == 0:
        raise ZeroNormError(f"{bound_id}: input has zero norm")
    sup = field.defined
    if out_kind == "lq":
        num = lp_norm(field.values, sup, q)
    else:
        num = sobolev_norm(field.values, sup, q, gradient=weak_gradient(field.values, sup))
    return {"ratio": num / denom, "output_norm": num, "input_norm": denom}


def norm_hypotheses(bound_id: str, n: int, beta: float, gamma: float, p: float) -> bool:
    if bound_id == "maximal-lq":
        return p > 1 and 0 < beta < n / p
    if bound_id == "spherical-lq":
        return n >= 2 and p > n / (n - 1) and 0 <= beta < min(n - 2 * n / (p * (n - 1)), (n - 1) / p)
    if bound_id in ("sobolev-embedding", "sobolev-finite-measure"):
        return 1 < p < n and 1 <= beta < n / p and 0 <= gamma <= n
    if bound_id == "lp-to-sobolev":
        return (n >= 2 and p > n / (n - 1)
                and 1 <= beta < min(n - 2 * n / (p * (n - 1)), (n - 1) / p))
    return p > 1 and beta == 0


def check_norm_bounds(mask: DomainMask, norm: NormParams, bound_id: str, gamma: float = 0.0,
                      functions: list[FunctionSpec] | None = None,
                      cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """Empirical constant of an operator norm bound over a battery of inputs.

    Asserts finite ratios, the largest ratio moving by at most
    ``stability_factor`` under one refinement, and exact invariance of every
    ratio under ``f -> 2 f``.
    """
    if bound_id not in NORM_BOUNDS:
        raise ConfigError(f"unknown norm bound {bound_id!r}; choose from {sorted(NORM_BOUNDS)}")
    rule = NORM_BOUNDS[bound_id][3]
    if norm.rule != rule:
        raise ConfigError(f"{bound_id} uses the {rule} exponent rule, got {norm.rule}")
    if bound_id == "beta-zero-sobolev" and norm.beta != 0:
        raise ConfigError("beta-zero-sobolev needs beta = 0")
    n = mask.grid.dim
    lo, hi = _box_of(mask)
    functions = functions or default_battery(n, lo, hi)
    masks = [mask]
    for _ in range(cfg.levels - 1):
        masks.append(refine(masks[-1], 2))
    per_level = []
    rows = []
    scale_err = 0.0
    for li, mi in enumerate(masks):
        ratios = []
        for spec in functions:
            fi = sample_function(mi.grid, spec)
            r = norm_ratio(fi, mi, bound_id, norm.beta, gamma, norm, cfg)
            ratios.append(r["ratio"])
            rows.append({"level": li, "function": spec.name, **r})
            if li == 0:
                r2 = norm_ratio(fi * 2.0, mi, bound_id, norm.beta, gamma, norm, cfg)["ratio"]
                scale_err = max(scale_err, abs(r2 - r["ratio"]) / abs(r["ratio"]))
        per_level.append(max(ratios))
    finite = all(math.isfinite(r["ratio"]) for r in rows)
    stable, worst = _stable(per_level, cfg.stability_factor) if len(per_level) > 1 else (True, 1.0)
    scale_ok = scale_err <= 1e-12
    return CheckReport(
        check_id="norm-bounds",
        label=bound_id,
        passed=finite and stable and scale_ok,
        points_checked=len(rows),
        max_violation=worst - cfg.stability_factor,
        violated_fraction=0.0 if finite else 1.0,
        empirical_constant=max(per_level),
        tolerance={"stability_factor": cfg.stability_factor, "scale_tolerance": 1e-12},
        values={
            "bound": bound_id,
            "max_ratio_per_level": per_level,
            "stability_ratio": worst,
            "scale_invariance_error": scale_err,
            "hypotheses_satisfied": norm_hypotheses(bound_id, n, norm.beta, gamma, norm.p),
            "ratios": rows,
        },
        params={**norm.to_dict(), "gamma": gamma, "normalization": cfg.normalization},
        grid=mask.grid.to_dict(),
    )


# -- zero boundary values ----------------------------------------------------------------------


def check_zero_boundary(f: ScalarField, mask: DomainMask, beta: float, gamma: float, p: float,
                        cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """On radii below 1: ``M_b f <= 2 sigma M_{b-1} f`` pointwise, and the quotient
    ``sum (M_b f / sigma)^q h^n`` stays below ``2^q sum (M_{b-1} f)^q h^n``.

    ``q`` follows the shifted rule. With ``levels >= 2`` the relative drift of the
    quotient between refinements is reported, and ``quotient_stable`` records
    whether it stays within ``hardy_drift``; drift does not decide ``passed``.
    """
    require_same_grid(f.grid, mask.grid)
    if beta < 1:
        raise ConfigError("the zero-boundary check needs beta >= 1")
    if not 0 <= gamma <= f.grid.dim:
        raise ConfigError("the zero-boundary check needs 0 <= gamma <= n")
    norm = NormParams(p, beta, f.grid.dim, "shifted")
    q = norm.q
    levels = _refinements(f, mask, cfg.levels)
    quotients, bounds = [], []
    first = None
    for fi, mi in levels:
        params = _op(beta, gamma, "small", cfg)
        M = maximal_field(fi, mi, params)
        Mp = maximal_field(fi, mi, params.with_(beta=beta - 1))
        pts = M.defined
        if not pts.any():
            _empty("zero-boundary", "radius below 1")
        tol = slack_for(fi, mi, cfg)
        excess = M.values.values[pts] - 2 * mi.sigma[pts] * Mp.values.values[pts] - tol["slack"]
        H = hardy_quotient_integral(M, mi, q)
        B = 2**q * float(np.sum(Mp.values.values[pts] ** q) * mi.grid.cell_volume)
        quotients.append(H)
        bounds.append(B)
        if first is None:
            first = (pts, excess, tol)
    pts, excess, tol = first
    violated = int(np.sum(excess > 0))
    drift = max((abs(b - a) / a if a > 0 else (0.0 if b == 0 else math.inf))
                for a, b in zip(quotients, quotients[1:])) if len(quotients) > 1 else 0.0
    hardy_ok = all(math.isfinite(H) and H <= B + tol["slack"] for H, B in zip(quotients, bounds))
    return CheckReport(
        check_id="zero-boundary",
        label=f"beta={beta:g},gamma={gamma:g},p={p:g}",
        passed=violated == 0 and hardy_ok,
        points_checked=int(pts.sum()),
        points_excluded=int(mask.inside.sum() - pts.sum()),
        max_violation=float(np.max(excess)),
        violated_fraction=violated / int(pts.sum()),
        tolerance={**tol, "hardy_drift": cfg.hardy_drift},
        values={"q": q, "quotients": quotients, "bounds": bounds, "quotient_drift": drift,
                "quotient_stable": drift <= cfg.hardy_drift, "hardy_bound_holds": hardy_ok,
                "hypotheses_satisfied": 1 < p < f.grid.dim and 1 <= beta < f.grid.dim / p},
        params={**_op(beta, gamma, "small", cfg).to_dict(), **norm.to_dict(), "function": _source(f)},
        grid=f.grid.to_dict(),
    )


# -- beta = 0 corollary -----------------------------------------------------------------------


def check_corollary(f: ScalarField, mask: DomainMask, gamma: float, p: float = 2.0,
                    cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """``|grad M f| <= g n M f + 2 M |grad f|`` for the undamped-order operator."""
    require_same_grid(f.grid, mask.grid)
    n = f.grid.dim
    params = _op(0.0, gamma, "all", cfg)
    M = maximal_field(f, mask, params)
    grad_f = gradient_magnitude(f, mask)
    Mg = maximal_field(grad_f, mask, params)
    rhs = gamma * n * M.values.values + 2 * Mg.values.values
    pw = _gradient_lhs(M, mask, cfg)
    tol = slack_for(f, mask, cfg)
    out_norm = sobolev_norm(M.values, M.defined, p, gradient=weak_gradient(M.values, M.defined))
    return _inequality_report(
        "corollary", pw, rhs, tol, cfg, f.grid,
        {**params.to_dict(), "p": p, "function": _source(f)},
        {"output_sobolev_norm": out_norm, "hypotheses_satisfied": p > 1},
        label=f"gamma={gamma:g}",
    )


# -- scalar inequalities --------------------------------------------------------------------------


def check_scalar_bounds(samples: int = 100, slack: float = 1e-12) -> CheckReport:
    """Dense scans of the elementary inequalities used in the proofs.

    ``samples`` points per axis of each 2D scan (``samples**2`` per
    inequality and dimension).
    """
    t = np.linspace(0, 1, samples + 2)[1:-1]
    r_big = np.logspace(0, 3, samples)
    r_all = np.logspace(-3, 3, samples)
    r_small = np.linspace(0, 1, samples + 2)[1:-1]
    results = {}
    total = 0
    worst = -math.inf
    for n in (1, 2):
        w = unit_ball_volume(n)
        gam = np.linspace(0, n, samples)
        T, G = np.meshgrid(t, gam, indexing="ij")
        results[f"power_ratio_n{n}"] = T**n / (1 + T**n) ** (1 - G / n) - 1.0

        R, G = np.meshgrid(r_big, gam, indexing="ij")
        area = n * w * R ** (n - 1)
        vol = w * R**n
        ratio = (1 + area) ** G * area / ((1 + vol) ** G * vol)
        results[f"surface_volume_n{n}"] = ratio / (n * (1 + n) ** G) - 1.0

        R, B = np.meshgrid(r_all, np.linspace(0, n, samples, endpoint=False), indexing="ij")
        results[f"damping_domination_n{n}"] = (1 + R**n) ** (B / n) / (1 + w * R**n) - 1.0

        R, G = np.meshgrid(r_small, gam, indexing="ij")
        results[f"doubling_below_one_n{n}"] = (1 + R**n) ** (G / n) / 2.0 - 1.0

    summary = {}
    for name, rel in results.items():
        rel = rel.ravel()
        total += rel.size
        worst = max(worst, float(rel.max()))
        summary[name] = {"samples": int(rel.size), "max_relative_excess": float(rel.max()),
                         "violations": int(np.sum(rel > slack))}
    violations = sum(s["violations"] for s in summary.values())

    # Small-radius surface/volume ratio: bounded by n(1+n)^g / r only up to a
    # constant. Record the constant, do not assert it.
    exploratory = {}
    for n in (1, 2):
        w = unit_ball_volume(n)
        R, G = np.meshgrid(r_small, np.linspace(0, n, samples), indexing="ij")
        area = n * w * R ** (n - 1)
        vol = w * R**n
        ratio = (1 + area) ** G * area / ((1 + vol) ** G * vol) * R / (n * (1 + n) ** G)
        exploratory[f"small_radius_surface_volume_n{n}"] = {
            "max_constant": float(ratio.max()),
            "fraction_above_one": float(np.mean(ratio > 1 + slack)),
        }
    return CheckReport(
        check_id="scalar-bounds",
        passed=violations == 0,
        points_checked=total,
        max_violation=worst,
        violated_fraction=violations / total,
        tolerance={"slack": slack},
        values={"inequalities": summary, "exploratory": exploratory},
    )


# -- fast path -----------------------------------------------------------------------------------


def _scaled_err(diff: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.abs(diff) / np.where(scale > 0, scale, 1.0)


def check_fast_path(f: ScalarField, tol: float = 1e-12, samples: int = 200,
                    cfg: CheckConfig = CheckConfig()) -> CheckReport:
    """Prefix-sum ball integrals against direct summation.

    Every (point, radius) pair whose ball fits the box is compared through the
    compiled kernel; ``samples`` seeded random pairs also go through the
    pure-Python :class:`PrefixTable`. Errors are relative to the ball
    integral of ``|f|``, the scale of any summation error, so signed inputs
    whose ball sums cancel to zero are still measured meaningfully.
    """
    grid = f.grid
    is2d = grid.dim == 2
    vals2d = f.values.reshape(1, -1) if grid.dim == 1 else f.values
    prefix = _kernels.row_prefix(vals2d, grid.cell_volume)
    idx = np.indices(grid.shape)
    room = np.min([np.minimum(idx[a], s - 1 - idx[a]) for a, s in enumerate(grid.shape)], axis=0)
    kmax = int(room.max())
    worst = 0.0
    pairs = 0
    bad = 0
    for k in range(1, kmax + 1):
        valid = room >= k
        fast = _kernels.ball_sums_fixed_k(prefix, k, halfwidths(kmax), is2d,
                                          valid.reshape(vals2d.shape)).reshape(grid.shape)
        direct = np.zeros(grid.shape)
        scale = np.zeros(grid.shape)
        where = np.argwhere(valid)
        for off in ball_offsets(grid, float(k * k)):
            v = f.values[tuple((where + off).T)]
            direct[tuple(where.T)] += v
            scale[tuple(where.T)] += np.abs(v)
        direct *= grid.cell_volume
        scale *= grid.cell_volume
        err = _scaled_err(fast[valid] - direct[valid], scale[valid])
        worst = max(worst, float(err.max()))
        bad += int(np.sum(err > tol))
        pairs += int(valid.sum())
    rng = np.random.default_rng(cfg.seed)
    table = PrefixTable(f)
    sampled_worst = 0.0
    for _ in range(samples):
        pts = np.argwhere(room >= 1)
        x = tuple(pts[rng.integers(len(pts))])
        k = int(rng.integers(1, room[x] + 1))
        r = k * grid.spacing
        d = ball_integral_direct(f, x, r)
        e = float(_scaled_err(np.array([table.ball(x, r) - d]),
                              np.array([ball_integral_direct(f.abs(), x, r)]))[0])
        sampled_worst = max(sampled_worst, e)
        bad += int(e > tol)
    return CheckReport(
        check_id="fast-path",
        passed=bad == 0,
        points_checked=pairs + samples,
        max_violation=max(worst, sampled_worst) - tol,
        violated_fraction=bad / (pairs + samples),
        tolerance={"relative": tol},
        values={"kernel_max_rel_err": worst, "table_max_rel_err": sampled_worst,
                "seed": cfg.seed, "samples": samples},
        params={"function": _source(f)},
        grid=grid.to_dict(),
    )


# -- convergence studies -----------------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    """Grid, function and probe for a refinement study."""

    dim: int = 1
    points: int = 33
    lo: float = 0.0
    hi: float = 1.0
    function: FunctionSpec = FunctionSpec("gaussian", {"center": 0.4})
    radius: float = 0.25
    p: float = 2.0
    decay: float = 0.75
    # residuals at or below this are rounding noise and count as converged
    floor: float = 1e-12

    def grid(self) -> GridSpec:
        return GridSpec.uniform(self.dim, self.points, self.lo, self.hi)


def _residual(study: str, f: ScalarField, sc: StudyConfig) -> float:
    center = tuple((s - 1) // 2 for s in f.grid.shape)
    if study == "green-identity":
        return green_identity_residual(f, center, sc.radius)
    if study == "sphere-ball-identity":
        return sphere_ball_identity_residual(f, center, sc.radius)
    return radial_derivative_residual(f, center, [sc.radius])


def _exact_lp(spec: FunctionSpec, sc: StudyConfig) -> float:
    from .catalog import evaluate

    def g(*xs):
        v, _ = evaluate(spec, tuple(np.array([x]) for x in xs))
        return abs(float(v[0])) ** sc.p

    if sc.dim == 1:
        val, _ = integrate.quad(g, sc.lo, sc.hi, epsabs=1e-13, epsrel=1e-13, limit=200)
    else:
        val, _ = integrate.dblquad(lambda y, x: g(x, y), sc.lo, sc.hi, sc.lo, sc.hi,
                                   epsabs=1e-12, epsrel=1e-12)
    return val ** (1 / sc.p)


def convergence_study(study: str, sc: StudyConfig, levels: int = 3,
                      check=None) -> SweepReport:
    """Repeat a residual, norm or check at spacings ``h, h/2, ...``.

    Residual studies assert that each level shrinks the residual to at most
    ``sc.decay`` of the previous one (or below ``sc.floor``); the ``lp-norm`` study asserts that the
    error against the exact integral does not grow. ``check`` (a callable
    ``(f, mask) -> CheckReport``) turns the study into a check trend: the
    violated fraction must not grow and empirical constants must stay within
    a factor 1.25 between levels.
    """
    if levels < 2:
        raise ConfigError("a convergence study needs at least 2 levels")
    grid = sc.grid()
    rows = []
    if check is not None:
        mask = rasterize_domain(grid, Box((sc.lo,) * sc.dim, (sc.hi,) * sc.dim))
        f = sample_function(grid, sc.function)
        for li in range(levels):
            if li:
                f, mask = refine(f, 2), refine(mask, 2)
            rep = check(f, mask)
            rows.append({"level": li, "h": f.grid.spacing, "violated_fraction": rep.violated_fraction,
                         "empirical_constant": rep.empirical_constant, "passed": rep.passed})
        vf = [r["violated_fraction"] for r in rows]
        ok = all(b <= a for a, b in zip(vf, vf[1:]))
        cs = [r["empirical_constant"] for r in rows]
        if all(c is not None for c in cs):
            ok = ok and _stable(cs, 1.25)[0]
        cols = ["level", "h", "violated_fraction", "empirical_constant", "passed"]
        return SweepReport(kind=f"convergence:{study}", columns=cols, rows=rows, passed=ok)

    if study not in STUDIES:
        raise ConfigError(f"unknown study {study!r}; choose from {STUDIES} or a check id")
    exact = _exact_lp(sc.function, sc) if study == "lp-norm" else None
    for li in range(levels):
        g = grid if li == 0 else grid.refined(2**li)
        f = sample_function(g, sc.function)
        if study == "lp-norm":
            # every grid point of the closed box, against the exact integral
            val = lp_norm(f, None, sc.p)
            rows.append({"level": li, "h": g.spacing, "value": val, "residual": abs(val - exact)})
        else:
            rows.append({"level": li, "h": g.spacing, "residual": _residual(study, f, sc)})
    res = [r["residual"] for r in rows]
    for i in range(1, len(rows)):
        rows[i]["ratio"] = res[i] / res[i - 1] if res[i - 1] > 0 else (0.0 if res[i] == 0 else math.inf)
    if study == "lp-norm":
        ok = all(b <= a for a, b in zip(res, res[1:]))
    else:
        ok = all(b <= sc.decay * a or b <= sc.floor for a, b in zip(res, res[1:]))
    cols = ["level", "h", "residual", "ratio"] + (["value"] if study == "lp-norm" else [])
    return SweepReport(kind=f"convergence:{study}", columns=cols, rows=rows, passed=ok,
                       values={"function": sc.function.to_dict(), "radius": sc.radius,
                               "decay_factor": sc.decay, "residual_floor": sc.floor})
