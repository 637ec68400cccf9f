"""Exception hierarchy shared by all fracopt modules."""

from __future__ import annotations


class FracoptError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracoptError):
    """A point lies outside the domain of the extended ratio objective."""


class InvalidConfigError(FracoptError):
    """Solver configuration violates its validity constraints."""


class InvalidProblemError(FracoptError):
    """Problem data fails a construction-time check (shape, symmetry, PSD, box)."""


class LineSearchError(FracoptError):
    """Backtracking exhausted its budget without an acceptable step."""


class DegenerateInputError(FracoptError):
    """An input is degenerate for the requested operation (zero vector, empty data)."""


class SizeGuardError(FracoptError):
    """A combinatorial routine was asked to run above its hard size limit."""


class ConvergenceError(FracoptError):
    """An iterative estimator failed to converge within its iteration cap."""


class InsufficientDataError(FracoptError):
    """Not enough usable data to compute the requested statistic."""


class NumericsError(FracoptError):
    """A numeric contract was violated (NaN from a callback, failed decrease check)."""


class ParseError(FracoptError):
    """A data file could not be parsed; the message names the offending line."""


class DimensionMismatchError(FracoptError):
    """Problem pieces have inconsistent shapes."""
