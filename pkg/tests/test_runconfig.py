from __future__ import annotations

import pytest

from fracmax.catalog import FunctionSpec
from fracmax.errors import ConfigError, UnknownFunctionError
from fracmax.grid import Annulus, Box, Disk
from fracmax.runconfig import KEYS, RunConfig, read_config_file


def test_defaults():
    cfg = RunConfig.from_raw("verify", {})
    assert cfg.resolution == 256 and cfg.grid().shape == (256,)
    assert cfg["operator.beta"] == 1.0 and cfg["verify.normalization"] == "discrete"
    assert [s.name for s in cfg.functions()] == ["constant", "linear", "sin_product", "gaussian", "polynomial"]
    assert RunConfig.from_raw("verify", {"grid.dim": "2"}).resolution == 128


def test_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# a comment\n"
        "grid.dim = 2\n"
        "grid.resolution = 48   # trailing comment\n"
        "\n"
        "domain.shape = annulus\n"
        "domain.inner = 0.1\n"
        "function.name = gaussian\n"
        "function.width = 0.2\n"
        "function.center = [0.4, 0.6]\n"
        "verify.checks = corollary, zero-boundary\n"
        "sweep.gamma = 0,0.5,1\n"
    )
    cfg = RunConfig.from_raw("verify", read_config_file(path))
    assert cfg.grid().shape == (48, 48)
    assert cfg.shape() == Annulus((0.5, 0.5), 0.1, 0.45)
    assert cfg.functions() == [FunctionSpec("gaussian", {"width": 0.2, "center": [0.4, 0.6]})]
    assert cfg["verify.checks"] == ["corollary", "zero-boundary"]
    assert cfg.sweep_lists() == ([1.0], [0.0, 0.5, 1.0], [2.0])


def test_named_function_without_params_uses_box_adapted_defaults():
    cfg = RunConfig.from_raw("compute", {"function.name": "sin_product", "grid.lo": "0", "grid.hi": "4"})
    assert cfg.functions()[0].params == {"lo": 0.0, "length": 4.0}


@pytest.mark.parametrize("raw,err", [
    ({"grid.colour": "red"}, ConfigError),
    ({"grid.dim": "3"}, ConfigError),
    ({"grid.dim": "two"}, ConfigError),
    ({"grid.resolution": "3"}, ConfigError),
    ({"grid.lo": "1", "grid.hi": "0"}, ConfigError),
    ({"domain.shape": "hexagon"}, ConfigError),
    ({"operator.branch": "middle"}, ConfigError),
    ({"norm.rule": "other"}, ConfigError),
    ({"verify.checks": "thm-everything"}, ConfigError),
    ({"norm.bounds": "nope"}, ConfigError),
    ({"verify.levels": "0"}, ConfigError),
    ({"function.name": "nope"}, UnknownFunctionError),
    ({"convergence.study": "nope"}, ConfigError),
])
def test_invalid_configs(raw, err):
    with pytest.raises(err):
        RunConfig.from_raw("verify", raw)


def test_disk_needs_two_dimensions():
    with pytest.raises(ConfigError):
        RunConfig.from_raw("verify", {"domain.shape": "disk"}).shape()
    assert RunConfig.from_raw("verify", {"grid.dim": "2", "domain.shape": "disk"}).shape() == Disk((0.5, 0.5), 0.4)
    assert RunConfig.from_raw("verify", {}).shape() == Box((0.0,), (1.0,))


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("grid.dim 2\n")
    with pytest.raises(ConfigError):
        read_config_file(path)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")


def test_echo_covers_every_key():
    echo = RunConfig.from_raw("verify", {"function.width": "0.3"}).to_dict()
    assert set(KEYS) <= set(echo)
    assert echo["function.params"] == {"width": 0.3} and echo["grid.resolution"] == 256
