"""Exception hierarchy shared by all modules."""


class FiniteKeyError(Exception):
    """Base class for errors raised by this package."""


class DomainError(FiniteKeyError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(FiniteKeyError, ValueError):
    """Inputs make a formula singular (coincident intensities, zero gain, ...)."""


class InfeasibleError(FiniteKeyError, ValueError):
    """A bound cannot be formed for the given inputs."""


class NonConvergenceError(FiniteKeyError, RuntimeError):
    """An iterative procedure did not converge.

    ``trace`` holds the sequence of iterates for diagnosis.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ConfigError(FiniteKeyError, ValueError):
    """Invalid run configuration."""
