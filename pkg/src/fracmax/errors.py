"""Exception hierarchy. Every error carries a stable machine-readable code."""

from __future__ import annotations


class FracmaxError(Exception):
    code = "fracmax.error"


class ConfigError(FracmaxError, ValueError):
    code = "config.invalid"


class GridMismatchError(FracmaxError, ValueError):
    code = "grid.mismatch"


class EmptyDomainError(FracmaxError, ValueError):
    code = "domain.empty"


class FullDomainError(FracmaxError, ValueError):
    code = "domain.full"


class UnknownFunctionError(ConfigError):
    code = "function.unknown"


class RefinementError(FracmaxError, ValueError):
    code = "grid.refine"


class GeometryError(FracmaxError, ValueError):
    """A ball or sphere leaves the grid's bounding box."""

    code = "geometry.outside_box"


class EmptyAdmissibleSetError(FracmaxError, ValueError):
    """No grid point survives the branch window and interior margin."""

    code = "check.empty_admissible"


class NumericalError(FracmaxError, ArithmeticError):
    code = "numeric.nonfinite"


class ZeroNormError(FracmaxError, ValueError):
    """A norm ratio was requested for an input with zero norm."""

    code = "check.zero_norm"


class FieldFormatError(FracmaxError, ValueError):
    """A field file is malformed or inconsistent with its header."""

    code = "io.format"
