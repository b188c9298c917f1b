"""Exception hierarchy used across the package."""


class IsoMassError(Exception):
    """Base class for all errors raised by isomass."""


class DomainError(IsoMassError, ValueError):
    """A parametric point lies outside the closed unit interval/cube."""


class KnotVectorError(IsoMassError, ValueError):
    """Invalid knot vector (not open, not sorted, excessive multiplicity)."""


class AssemblyError(IsoMassError):
    """Assembled matrix failed a structural check (e.g. not SPD)."""


class DataError(IsoMassError, ValueError):
    """Input data violates an assumption (negative weights, shape mismatch)."""


class SingularGeometryError(IsoMassError):
    """An operation requires a regular parametrization but got a singular one."""


class ConformityError(IsoMassError):
    """Adjacent patches do not share a conforming interface discretization."""


class FactorizationError(IsoMassError):
    """Banded Cholesky factorization failed (factor is not SPD)."""


class BreakdownError(IsoMassError):
    """PCG breakdown: the preconditioner (or operator) is not positive definite."""


class ConvergenceError(IsoMassError):
    """PCG did not reach the requested tolerance within ``max_iter`` iterations."""

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class ConfigError(IsoMassError, ValueError):
    """Invalid benchmark configuration."""
