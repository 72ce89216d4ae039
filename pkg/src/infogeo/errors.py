"""Exception and warning classes shared across the package."""


class InfogeoError(Exception):
    """Base class for all errors raised by infogeo."""


class ContractError(InfogeoError, ValueError):
    """A precondition of an operation does not hold for the given inputs."""


class DomainError(ContractError):
    """An input lies outside the domain of a function (e.g. a boundary weight)."""


class NumericError(InfogeoError, ArithmeticError):
    """A numerical procedure produced an inconsistent or unreliable value."""


class SolverError(NumericError):
    """The projection solver failed; ``best`` carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SamplingError(NumericError):
    """Fiber sampling could not produce any usable point."""


class InsufficientSampleError(SamplingError):
    """Too few verified fiber points to support a constancy verdict."""


class ConfigError(InfogeoError):
    """A CLI job configuration failed validation."""


class NonUniquenessWarning(UserWarning):
    """Multistart projection found more than one stationary point."""


class DegeneracyWarning(UserWarning):
    """Fiber constraints are rank deficient."""
