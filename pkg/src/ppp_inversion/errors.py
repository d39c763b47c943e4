"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class BoundViolationError(RuntimeError):
    """An intensity exceeded its declared upper bound ``lambda_max``."""


class ContractViolationError(ValueError):
    pass


class ForwardError(RuntimeError):
    """The forward map failed to produce a finite output."""


class DegenerateError(ArithmeticError):
    """All weights, responsibilities or masses collapsed to zero."""


class EmptyPatternError(DegenerateError):
    """Moments were requested for an empty pattern; ``summary`` keeps the counts."""

    def __init__(self, message, summary=None):
        super().__init__(message)
        self.summary = summary


class SPDViolationError(ValueError):
    """A covariance matrix failed its Cholesky factorization."""


class SolverError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass
