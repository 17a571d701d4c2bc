"""Exception types shared across the package."""


class DDEFloquetError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DDEFloquetError):
    """Malformed provider table, model file, or run configuration."""


class DomainError(DDEFloquetError):
    """Arguments outside the admissible domain (e.g. t < s, mu left of strip)."""


class ResolutionError(DDEFloquetError):
    """Requested partition count exceeds the hard cap."""


class NearPoleError(DDEFloquetError):
    """(I - z L) numerically singular in adaptive mode."""


class DerivativeUnreliableError(DDEFloquetError):
    """Cauchy-Riemann cross-check of finite differences failed persistently."""


class NumericalError(DDEFloquetError):
    """Defective integration or eigenvalue extraction."""


class PreconditionError(DDEFloquetError):
    """Operator precondition violated (e.g. instantaneous eigenvalue on the axis)."""


class AuditInconclusiveError(DDEFloquetError):
    """Contour audit exceeded its boundary-refinement budget."""


class NoConvergenceError(DDEFloquetError):
    """Newton iteration failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateOrbitError(DDEFloquetError):
    """Orbit solver collapsed onto an equilibrium."""


class IncompleteInputError(DDEFloquetError):
    """Curve data does not cover the required frequency range."""
