"""Exception hierarchy."""


class OverdispError(Exception):
    """Base class for all package errors."""


class DomainError(OverdispError, ValueError):
    """An argument lies outside the domain of a density or sampler."""


class IntegrationError(OverdispError, ArithmeticError):
    """Quadrature did not stabilise under node doubling.

    ``estimates`` holds the last two log-values that disagreed.
    """

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class DifferentiationError(OverdispError, ArithmeticError):
    """A finite-difference evaluation returned a non-finite value."""


class SingularInformationError(OverdispError, ArithmeticError):
    """The negative Hessian / information matrix is not positive definite."""


class DegenerateDataError(OverdispError, ValueError):
    """The data cannot support the requested fit (rank deficiency, separation)."""


class ConfigError(OverdispError, ValueError):
    """Invalid simulation or CLI configuration."""


class AuditFormatError(OverdispError, ValueError):
    """An audit file does not match the expected schema version."""
