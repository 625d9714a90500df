"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class GeoPhaseError(Exception):
    """Base class for all package errors."""


class ValidationError(GeoPhaseError, ValueError):
    """Input does not satisfy a documented precondition."""


class NumericalError(GeoPhaseError, ArithmeticError):
    """A computation left its region of validity (rank change, drift, ...)."""
