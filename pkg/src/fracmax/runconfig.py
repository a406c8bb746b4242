"""Run configuration: flat ``section.key = value`` files plus flag overrides.

Example file::

    # 2D disk, Gaussian bump
    grid.dim = 2
    grid.resolution = 96
    domain.shape = disk
    domain.radius = 0.4
    function.name = gaussian
    function.width = 0.1
    operator.beta = 1
    operator.gamma = 0.5
    verify.checks = thm-gradient-sobolev,zero-boundary

Blank lines and ``#`` comments are ignored. ``function.<param>`` values are
read as JSON when they parse as JSON, otherwise as plain strings. Every other
key is listed in :data:`KEYS`; unknown keys are configuration errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .averages import BRANCHES, NORMALIZATIONS
from .calculus import RULES
from .catalog import CATALOG, FunctionSpec, default_battery
from .errors import ConfigError, UnknownFunctionError
from .grid import Annulus, Box, Disk, DomainMask, GridSpec, rasterize_domain
from .verify import CHECK_IDS, NORM_BOUNDS, STUDIES, CheckConfig

BATTERY = "battery"
SHAPES = ("box", "disk", "annulus")

# key -> (parser, default); a default of None means "derived" or "unset"
KEYS: dict[str, tuple] = {
    "grid.dim": ("int", 1),
    "grid.resolution": ("int", None),
    "grid.lo": ("float", 0.0),
    "grid.hi": ("float", 1.0),
    "domain.shape": ("str", "box"),
    "domain.center": ("floats", None),
    "domain.radius": ("float", None),
    "domain.inner": ("float", None),
    "domain.outer": ("float", None),
    "function.name": ("str", BATTERY),
    "operator.beta": ("float", 1.0),
    "operator.gamma": ("float", 0.0),
    "operator.branch": ("str", "all"),
    "operator.l": ("float", 0.5),
    "operator.normalization": ("str", "continuum"),
    "norm.p": ("float", 2.0),
    "norm.rule": ("str", "sobolev"),
    "norm.bounds": ("strs", ["maximal-lq"]),
    "verify.checks": ("strs", []),
    "verify.slack_abs": ("float", 1e-9),
    "verify.slack_h": ("float", None),
    "verify.levels": ("int", 2),
    "verify.normalization": ("str", "discrete"),
    "verify.margin_cells": ("float", 3.0),
    "verify.switch_jump": ("int", 2),
    "verify.max_switch_fraction": ("float", 0.05),
    "verify.stability_factor": ("float", 1.25),
    "verify.seed": ("int", 0),
    "sweep.beta": ("floats", None),
    "sweep.gamma": ("floats", None),
    "sweep.p": ("floats", None),
    "sweep.check": ("str", "thm-gradient-sobolev"),
    "convergence.study": ("str", "green-identity"),
    "convergence.levels": ("int", 3),
    "convergence.radius": ("float", 0.25),
    "convergence.points": ("int", 33),
    "output.dir": ("str", "fracmax-out"),
}


def _parse(kind: str, key: str, text: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "floats":
            return [float(t) for t in text.split(",") if t.strip()]
        if kind == "strs":
            return [t.strip() for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from None
    return text


def _json_or_text(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def read_config_file(path) -> dict[str, str]:
    """Raw ``key -> text`` pairs; later duplicates win."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    raw = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        raw[key.strip()] = value.strip()
    return raw


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    function_params: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, command: str, raw: dict[str, str]) -> RunConfig:
        values = {k: d for k, (_, d) in KEYS.items()}
        fparams = {}
        for key, text in raw.items():
            if key.startswith("function.") and key != "function.name":
                fparams[key.split(".", 1)[1]] = _json_or_text(text)
            elif key in KEYS:
                values[key] = _parse(KEYS[key][0], key, text)
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        cfg = cls(command, values, fparams)
        cfg.validate()
        return cfg

    def with_values(self, **overrides) -> RunConfig:
        return RunConfig(self.command, {**self.values, **overrides}, self.function_params)

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        if v["grid.dim"] not in (1, 2):
            raise ConfigError("grid.dim must be 1 or 2")
        if v["grid.hi"] <= v["grid.lo"]:
            raise ConfigError("grid.hi must exceed grid.lo")
        if self.resolution < 4:
            raise ConfigError("grid.resolution must be at least 4")
        if v["domain.shape"] not in SHAPES:
            raise ConfigError(f"domain.shape must be one of {SHAPES}")
        if v["operator.branch"] not in BRANCHES:
            raise ConfigError(f"operator.branch must be one of {BRANCHES}")
        for key in ("operator.normalization", "verify.normalization"):
            if v[key] not in NORMALIZATIONS:
                raise ConfigError(f"{key} must be one of {NORMALIZATIONS}")
        if v["norm.rule"] not in RULES:
            raise ConfigError(f"norm.rule must be one of {RULES}")
        name = v["function.name"]
        if name != BATTERY and name not in CATALOG:
            raise UnknownFunctionError(f"unknown function id {name!r}")
        for cid in v["verify.checks"]:
            if cid not in CHECK_IDS:
                raise ConfigError(f"unknown check id {cid!r}; choose from {', '.join(CHECK_IDS)}")
        for bid in v["norm.bounds"]:
            if bid not in NORM_BOUNDS:
                raise ConfigError(f"unknown norm bound {bid!r}")
        if v["sweep.check"] not in CHECK_IDS:
            raise ConfigError(f"unknown sweep check {v['sweep.check']!r}")
        study = v["convergence.study"]
        if study not in STUDIES and study not in CHECK_IDS:
            raise ConfigError(f"unknown convergence study {study!r}")
        self.check_config()

    @property
    def resolution(self) -> int:
        res = self.values["grid.resolution"]
        if res is None:
            return 256 if self.values["grid.dim"] == 1 else 128
        return res

    def grid(self, resolution: int | None = None) -> GridSpec:
        v = self.values
        return GridSpec.uniform(v["grid.dim"], resolution or self.resolution, v["grid.lo"], v["grid.hi"])

    def shape(self):
        v = self.values
        dim, lo, hi = v["grid.dim"], v["grid.lo"], v["grid.hi"]
        kind = v["domain.shape"]
        if kind == "box":
            return Box((lo,) * dim, (hi,) * dim)
        if dim != 2:
            raise ConfigError(f"domain.shape={kind} needs grid.dim = 2")
        center = tuple(v["domain.center"] or [(lo + hi) / 2] * 2)
        if len(center) != 2:
            raise ConfigError("domain.center needs two coordinates")
        if kind == "disk":
            return Disk(center, v["domain.radius"] or 0.4 * (hi - lo))
        inner = v["domain.inner"] if v["domain.inner"] is not None else 0.15 * (hi - lo)
        outer = v["domain.outer"] if v["domain.outer"] is not None else 0.45 * (hi - lo)
        return Annulus(center, inner, outer)

    def mask(self, resolution: int | None = None) -> DomainMask:
        return rasterize_domain(self.grid(resolution), self.shape())

    def functions(self) -> list[FunctionSpec]:
        v = self.values
        battery = default_battery(v["grid.dim"], v["grid.lo"], v["grid.hi"])
        name = v["function.name"]
        if name == BATTERY:
            return battery
        if not self.function_params:
            # catalog defaults adapted to the box when the battery has the function
            for spec in battery:
                if spec.name == name:
                    return [spec]
        return [FunctionSpec(name, dict(self.function_params))]

    def check_config(self) -> CheckConfig:
        v = self.values
        return CheckConfig(
            slack_abs=v["verify.slack_abs"],
            slack_h=v["verify.slack_h"],
            margin_cells=v["verify.margin_cells"],
            switch_jump=v["verify.switch_jump"],
            max_switch_fraction=v["verify.max_switch_fraction"],
            stability_factor=v["verify.stability_factor"],
            levels=v["verify.levels"],
            normalization=v["verify.normalization"],
            seed=v["verify.seed"],
        )

    def sweep_lists(self) -> tuple[list[float], list[float], list[float]]:
        v = self.values
        betas = v["sweep.beta"] if v["sweep.beta"] is not None else [v["operator.beta"]]
        gammas = v["sweep.gamma"] if v["sweep.gamma"] is not None else [v["operator.gamma"]]
        ps = v["sweep.p"] if v["sweep.p"] is not None else [v["norm.p"]]
        return betas, gammas, ps

    def to_dict(self) -> dict:
        """Echo of every resolved setting, for reports."""
        out = {"command": self.command, **self.values, "grid.resolution": self.resolution}
        out["function.params"] = dict(sorted(self.function_params.items()))
        return out


__all__ = ["BATTERY", "KEYS", "RunConfig", "read_config_file"]
