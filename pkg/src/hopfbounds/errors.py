"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (CLI exit code 1);
broken internal identities derive from :class:`ConsistencyError` (exit code 2).
"""


class HopfBoundsError(Exception):
    """Base class for all package errors."""


class ValidationError(HopfBoundsError, ValueError):
    """Invalid user input or model coordinates."""


class DomainError(ValidationError):
    """Arguments outside the mathematical domain of an operation."""


class ConvexityError(ValidationError):
    """A curve specification fails strict convexity or containment."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ConsistencyError(HopfBoundsError, RuntimeError):
    """An internal identity failed beyond tolerance; indicates a bug."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RootFindingError(ConsistencyError):
    """Next-intersection search did not converge."""


class IntegrationError(ConsistencyError):
    """Adaptive integrator could not meet the tolerance."""
