"""Local fractional damped maximal operators on grids, with inequality checkers."""

__version__ = "0.1.0"
