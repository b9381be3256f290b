"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`LandauLabError`, so callers can catch one type.  The CLI maps
the subclasses onto exit codes (see :mod:`landaulab.lab.cli`).
"""


class LandauLabError(Exception):
    """Base class for package errors."""


class ValidationError(LandauLabError, ValueError):
    """Invalid input or configuration value.

    Parameters
    ----------
    message : str
        Human readable explanation.
    key : str, optional
        Dotted configuration key that was rejected, when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class DomainError(ValidationError):
    """A parameter lies outside the range where an object is defined."""


class SingularityError(LandauLabError, ZeroDivisionError):
    """A kernel was evaluated exactly at its singular point."""


class QuadratureError(LandauLabError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message if achieved is None else f"{message} (achieved {achieved:.3e})")


class SizeCapError(ValidationError):
    """Dense assembly requested above the configured size cap."""

    def __init__(self, n, cap):
        self.n, self.cap = n, cap
        super().__init__(f"dense operator of size {n} exceeds cap {cap} (grid N^3 <= {cap})")


class InadmissibleWeight(ValidationError):
    """The weight is not admissible for the potential and exponent p."""


class Infeasible(LandauLabError):
    """The requested rate cannot be reached (for instance lambda >= abscissa)."""


class SearchExhausted(LandauLabError):
    """A constructive search stopped before meeting its goal."""

    def __init__(self, message, best_margin=None):
        self.best_margin = best_margin
        super().__init__(message if best_margin is None else f"{message}; best margin {best_margin:.4g}")


class NumericalFailure(LandauLabError, ArithmeticError):
    """Base for failures detected while time stepping."""


class BlowUp(NumericalFailure):
    """A monitored norm grew beyond the blow-up factor."""


class MomentDrift(NumericalFailure):
    """Conserved moments drifted beyond the configured budget."""


class NonPositiveDensity(LandauLabError, ValueError):
    """Too much mass sits on non-positive nodes for log-based functionals."""
