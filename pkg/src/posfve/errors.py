"""Exception hierarchy shared by all solver modules."""


class FVEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(FVEError, ValueError):
    pass


class InvalidMesh(FVEError, ValueError):
    pass


class InvalidElement(FVEError, ValueError):
    pass


class InvalidCoefficient(FVEError, ValueError):
    pass


class DomainError(FVEError, ValueError):
    """A state-dependent quantity was evaluated outside its domain (e.g. u < 0)."""


class ConfigurationError(FVEError, ValueError):
    pass


class SingularMatrix(FVEError, ArithmeticError):
    pass


class NonConvergence(FVEError, RuntimeError):
    """Iteration limit reached; ``last`` holds the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class PositivityViolation(FVEError, RuntimeError):
    def __init__(self, message, field=None, step=None):
        super().__init__(message)
        self.field = field
        self.step = step
