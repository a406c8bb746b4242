"""Command-line front end.

    fracmax compute      write maximal, spherical and K^l fields plus gradients
    fracmax verify       run named checks, write report.json and summary.tsv
    fracmax sweep        Cartesian (beta, gamma, p) sweep of one check
    fracmax convergence  residual or check trend under grid refinement
    fracmax report       re-render a saved report as a summary table

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 configuration or
usage error, 3 non-finite numbers detected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, fieldio
from .averages import OperatorParams
from .calculus import RULES, NormParams, lp_norm, weak_gradient
from .catalog import FunctionSpec, sample_function
from .errors import ConfigError, FracmaxError, NumericalError
from .grid import DomainMask, ScalarField
from .maximal import KlParams, MaximalField, k_l_field, maximal_field, reduce_check, spherical_maximal_field
from .reports import CheckReport, SweepReport, dumps, fmt, suite_document, summary_table
from .runconfig import RunConfig, read_config_file
from .verify import (
    NORM_BOUNDS,
    STUDIES,
    StudyConfig,
    check_corollary,
    check_fast_path,
    check_kl_lemmas,
    check_norm_bounds,
    check_scalar_bounds,
    check_thm_gradient_lp,
    check_thm_gradient_sobolev,
    check_zero_boundary,
    convergence_study,
    norm_ratio,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# flag dest -> config key
FLAG_KEYS = {
    "out": "output.dir",
    "dim": "grid.dim",
    "resolution": "grid.resolution",
    "domain": "domain.shape",
    "function": "function.name",
    "beta": "operator.beta",
    "gamma": "operator.gamma",
    "branch": "operator.branch",
    "l": "operator.l",
    "p": "norm.p",
    "rule": "norm.rule",
    "bound": "norm.bounds",
    "check": "verify.checks",
    "slack_abs": "verify.slack_abs",
    "slack_h": "verify.slack_h",
    "levels": "verify.levels",
    "normalization": "verify.normalization",
    "seed": "verify.seed",
}

# in these commands the numeric flags feed the list-valued keys instead
SWEEP_KEYS = {"beta": "sweep.beta", "gamma": "sweep.gamma", "p": "sweep.p", "check": "sweep.check"}
CONVERGENCE_KEYS = {"levels": "convergence.levels", "check": "convergence.study"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key=value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--dim", help="1 or 2")
    common.add_argument("--resolution", metavar="N", help="grid points per axis")
    common.add_argument("--domain", help="box, disk or annulus")
    common.add_argument("--function", help="catalog function id, or 'battery'")
    common.add_argument("--beta", help="fractional order (comma list in sweep)")
    common.add_argument("--gamma", help="damping exponent (comma list in sweep)")
    common.add_argument("--branch", help="all, small or large")
    common.add_argument("--l", help="K^l radius fraction in (0, 1)")
    common.add_argument("--p", help="input exponent (comma list in sweep)")
    common.add_argument("--rule", help="sobolev or shifted")
    common.add_argument("--bound", help="norm bound id(s) for norm-bounds")
    common.add_argument("--check", metavar="ID[,ID...]", help="check ids (a study id in convergence)")
    common.add_argument("--slack-abs", help="absolute slack c_abs")
    common.add_argument("--slack-h", help="slack per unit spacing c_h")
    common.add_argument("--levels", help="refinement levels")
    common.add_argument("--normalization", help="checker ball normalization: discrete or continuum")
    common.add_argument("--seed", help="seed for sampled checks")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")

    parser = argparse.ArgumentParser(prog="fracmax", description="Damped fractional maximal operators on grids.")
    parser.add_argument("--version", action="version", version=f"fracmax {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("compute", parents=[common], help="write operator fields")
    sub.add_parser("verify", parents=[common], help="run checks")
    sub.add_parser("sweep", parents=[common], help="parameter sweep")
    sub.add_parser("convergence", parents=[common], help="refinement study")
    rep = sub.add_parser("report", help="print the summary table of a saved report")
    rep.add_argument("path", help="report.json, sweep.json or convergence.json")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    remap = {"sweep": SWEEP_KEYS, "convergence": CONVERGENCE_KEYS}.get(args.command, {})
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            raw[remap.get(dest, key)] = value
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        raw[key.strip()] = value.strip()
    return RunConfig.from_raw(args.command, raw)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _require_finite(arr, what: str) -> None:
    if np.isnan(np.asarray(arr, dtype=float)).any():
        raise NumericalError(f"NaN detected in {what}")


# -- compute -------------------------------------------------------------------------


def _summary_norm(cfg: RunConfig, dim: int) -> NormParams | None:
    """Exponents for the printed L^q norms: the configured rule, else the other
    one when the configured rule has no valid ``q``."""
    rules = [cfg["norm.rule"]] + [r for r in RULES if r != cfg["norm.rule"]]
    for rule in rules:
        try:
            return NormParams(cfg["norm.p"], cfg["operator.beta"], dim, rule)
        except ConfigError:
            continue
    return None


def _field_outputs(name: str, field: MaximalField):
    grad = weak_gradient(field.values, field.defined)
    yield f"{name}.field", field.values
    yield f"{name}.argmax.field", ScalarField(field.grid, np.asarray(field.argmax_radius, dtype=float))
    yield f"{name}.gradient.field", grad.magnitude


def cmd_compute(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    mask = cfg.mask()
    params = OperatorParams(cfg["operator.beta"], cfg["operator.gamma"], cfg["operator.branch"],
                            cfg["operator.normalization"])
    klp = KlParams(cfg["operator.l"], params.with_(branch="all"))
    norm = _summary_norm(cfg, mask.grid.dim)
    fieldio.write_mask(out / "domain.mask", mask)
    lines = ["function\toperator\tdefined_points\trule\tlq_exponent\tlq_norm"]
    meta = {"config": cfg.to_dict(), "outputs": {}}
    for spec in cfg.functions():
        f = sample_function(mask.grid, spec)
        fieldio.write_field(out / f"{spec.name}.input.field", f)
        fields = {
            "maximal": maximal_field(f, mask, params),
            "spherical": spherical_maximal_field(f, mask, params),
            "k_l": k_l_field(f, mask, klp),
        }
        for kind, field in fields.items():
            stem = f"{spec.name}.{kind}"
            _require_finite(field.values.values, stem)
            for fname, data in _field_outputs(stem, field):
                fieldio.write_field(out / fname, data)
            meta["outputs"][stem] = field.metadata()
            row = [spec.name, kind, str(int(field.defined.sum()))]
            if norm is None:
                row += ["", "", ""]
            else:
                row += [norm.rule, fmt(norm.q), fmt(lp_norm(field.values, field.defined, norm.q))]
            lines.append("\t".join(row))
    table = "\n".join(lines) + "\n"
    _write(out / "compute.tsv", table)
    _write(out / "compute.json", dumps(meta))
    sys.stdout.write(table)
    return EXIT_PASS


# -- verify --------------------------------------------------------------------------


def _labelled(rep: CheckReport, spec: FunctionSpec) -> CheckReport:
    rep.label = f"{spec.name}:{rep.label}" if rep.label else spec.name
    return rep


def run_check(cid: str, cfg: RunConfig, mask: DomainMask | None = None,
              beta: float | None = None, gamma: float | None = None,
              p: float | None = None, functions: list[FunctionSpec] | None = None) -> list[CheckReport]:
    """Run one check id over the configured functions; overrides are for sweeps."""
    beta = cfg["operator.beta"] if beta is None else beta
    gamma = cfg["operator.gamma"] if gamma is None else gamma
    p = cfg["norm.p"] if p is None else p
    cc = cfg.check_config()
    branch = cfg["operator.branch"]
    if cid == "scalar-bounds":
        return [check_scalar_bounds()]
    mask = cfg.mask() if mask is None else mask
    functions = cfg.functions() if functions is None else functions
    if cid == "norm-bounds":
        n = mask.grid.dim
        return [check_norm_bounds(mask, NormParams(p, beta, n, NORM_BOUNDS[b][3]), b, gamma, functions, cc)
                for b in cfg["norm.bounds"]]
    reports = []
    for spec in functions:
        f = sample_function(mask.grid, spec)
        if cid == "reduction":
            op = OperatorParams(beta, gamma, normalization=cc.normalization)
            rep = reduce_check(f, mask, op)
        elif cid == "fast-path":
            rep = check_fast_path(f, cfg=cc)
        elif cid == "thm-gradient-sobolev":
            rep = check_thm_gradient_sobolev(f, mask, beta, gamma, branch, cc)
        elif cid == "thm-gradient-lp":
            rep = check_thm_gradient_lp(f, mask, beta, gamma, branch, cc)
        elif cid == "kl-lemmas":
            rep = check_kl_lemmas(f, mask, KlParams(cfg["operator.l"], OperatorParams(beta, gamma)), cc)
        elif cid == "zero-boundary":
            rep = check_zero_boundary(f, mask, beta, gamma, p, cc)
        elif cid == "corollary":
            rep = check_corollary(f, mask, gamma, p, cc)
        else:
            raise ConfigError(f"unknown check id {cid!r}")
        reports.append(_labelled(rep, spec))
    return reports


def _report_nan(reports: list[CheckReport]) -> None:
    for rep in reports:
        for v in (rep.max_violation, rep.empirical_constant):
            if v is not None and isinstance(v, float) and math.isnan(v):
                raise NumericalError(f"NaN in report {rep.check_id}:{rep.label}")


def cmd_verify(cfg: RunConfig) -> int:
    checks = cfg["verify.checks"]
    if not checks:
        raise ConfigError("verify needs at least one check (--check ID[,ID...])")
    out = _out_dir(cfg)
    reports = []
    for cid in checks:
        reports.extend(run_check(cid, cfg))
    _report_nan(reports)
    doc = suite_document(reports, cfg.to_dict())
    table = summary_table(reports)
    _write(out / "report.json", dumps(doc))
    _write(out / "summary.tsv", table)
    sys.stdout.write(table)
    return EXIT_PASS if doc["passed"] else EXIT_FAIL


# -- sweep ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["beta", "gamma", "p", "function", "check_id", "passed", "violated_fraction",
                 "empirical_constant", "max_violation", "norm_rule", "norm_ratio"]


def _sweep_norm_ratio(f, mask, beta, gamma, p, cfg: RunConfig) -> tuple[str, float | None]:
    norm = _summary_norm(cfg.with_values(**{"operator.beta": beta, "norm.p": p}), mask.grid.dim)
    if norm is None:
        return "", None
    return norm.rule, norm_ratio(f, mask, "maximal-lq", beta, gamma, norm, cfg.check_config())["ratio"]


def cmd_sweep(cfg: RunConfig) -> int:
    betas, gammas, ps = cfg.sweep_lists()
    if not (betas and gammas and ps):
        raise ConfigError("empty sweep: every sweep list needs at least one value")
    cid = cfg["sweep.check"]
    if cid in ("scalar-bounds", "norm-bounds"):
        raise ConfigError(f"sweep runs per-function checks; {cid} is not one")
    out = _out_dir(cfg)
    mask = cfg.mask()
    rows = []
    for beta in betas:
        for gamma in gammas:
            for p in ps:
                for spec in cfg.functions():
                    rep = run_check(cid, cfg, mask, beta, gamma, p, [spec])[0]
                    _report_nan([rep])
                    f = sample_function(mask.grid, spec)
                    rule, ratio = _sweep_norm_ratio(f, mask, beta, gamma, p, cfg)
                    rows.append({
                        "beta": beta, "gamma": gamma, "p": p, "function": spec.name,
                        "check_id": cid, "passed": rep.passed,
                        "violated_fraction": rep.violated_fraction,
                        "empirical_constant": rep.empirical_constant,
                        "max_violation": rep.max_violation,
                        "norm_rule": rule, "norm_ratio": ratio,
                    })
    sweep = SweepReport(kind=f"sweep:{cid}", columns=SWEEP_COLUMNS, rows=rows,
                        passed=all(r["passed"] for r in rows), values={"config": cfg.to_dict()})
    table = sweep.to_table()
    _write(out / "sweep.tsv", table)
    _write(out / "sweep.json", sweep.to_json())
    sys.stdout.write(table)
    return EXIT_PASS if sweep.passed else EXIT_FAIL


# -- convergence ---------------------------------------------------------------------


def _study_check(cid: str, cfg: RunConfig):
    def run(f: ScalarField, mask: DomainMask) -> CheckReport:
        return run_check(cid, cfg, mask, functions=[f.source])[0]
    return run


def cmd_convergence(cfg: RunConfig) -> int:
    study = cfg["convergence.study"]
    levels = cfg["convergence.levels"]
    dim, lo, hi = cfg["grid.dim"], cfg["grid.lo"], cfg["grid.hi"]
    if cfg["function.name"] == "battery":
        # off-centre bump so no identity is exact by symmetry
        fn = FunctionSpec("gaussian", {"center": [lo + 0.4 * (hi - lo)] * dim, "width": 0.15 * (hi - lo)})
    else:
        fn = cfg.functions()[0]
    sc = StudyConfig(
        dim=dim,
        points=cfg["convergence.points"] if cfg["grid.resolution"] is None else cfg.resolution,
        lo=lo, hi=hi, function=fn,
        radius=cfg["convergence.radius"], p=cfg["norm.p"],
    )
    check = None if study in STUDIES else _study_check(study, cfg)
    out = _out_dir(cfg)
    rep = convergence_study(study, sc, levels, check)
    rep.values["config"] = cfg.to_dict()
    for row in rep.rows:
        for key in ("residual", "violated_fraction", "empirical_constant"):
            if isinstance(row.get(key), float) and math.isnan(row[key]):
                raise NumericalError(f"NaN in convergence {key}")
    table = rep.to_table()
    _write(out / "convergence.tsv", table)
    _write(out / "convergence.json", rep.to_json())
    sys.stdout.write(table)
    return EXIT_PASS if rep.passed else EXIT_FAIL


# -- report --------------------------------------------------------------------------


def cmd_report(path: str) -> int:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from None
    if "checks" in doc:
        reports = [CheckReport.from_dict(c) for c in doc["checks"]]
        sys.stdout.write(summary_table(reports))
    elif "rows" in doc:
        sys.stdout.write(SweepReport(**doc).to_table())
    else:
        raise ConfigError(f"{path} is not a fracmax report")
    return EXIT_PASS if doc.get("passed") else EXIT_FAIL


COMMANDS = {"compute": cmd_compute, "verify": cmd_verify, "sweep": cmd_sweep,
            "convergence": cmd_convergence}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.path)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except NumericalError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FracmaxError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
