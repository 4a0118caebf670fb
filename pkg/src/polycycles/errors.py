"""Exception hierarchy.

Model problems (bad files, degenerate or unsupported geometry) are kept
separate from numeric failures (integration blow-up, rejected fits) so the
command line tool can map them to distinct exit codes.
"""
from __future__ import annotations


class PolycycleError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionError(PolycycleError):
    """Syntax or semantic error in an expression source string.

    Carries the 1-based line and column of the offending token.
    """

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ModelError(PolycycleError):
    """A model file or model definition is invalid."""


class DegeneracyError(ModelError):
    """A polycycle corner fails the hyperbolicity requirements."""


class UnsupportedGeometryError(ModelError):
    """The polycycle geometry falls outside the supported class
    (axis-parallel separatrices reachable by signed-permutation charts)."""


class NumericError(PolycycleError):
    """A numeric computation failed or left its validity domain."""


class PoleError(NumericError):
    """Mellin transform order too close to a nonnegative integer pole."""


class OutOfBasinError(NumericError):
    """A trajectory left the neighborhood where the return map is defined."""
