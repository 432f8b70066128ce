"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class TreeAnovaError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(TreeAnovaError, ValueError):
    """A parameter lies outside its admissible domain."""


class UnsupportedMomentsError(TreeAnovaError, ValueError):
    """The requested distribution has no finite mean or variance."""


class InsufficientDataError(TreeAnovaError, ValueError):
    """A group has too few observations for the requested statistic."""


class DegenerateVarianceError(TreeAnovaError, ArithmeticError):
    """A variance that must be positive is zero."""


class DegenerateLikelihoodError(DegenerateVarianceError):
    """The likelihood is unbounded because a fitted group variance is zero."""


class ConvergenceError(TreeAnovaError, ArithmeticError):
    """An iterative estimator stopped before meeting its tolerance.

    Attributes
    ----------
    result : RestrictedMleResult or None
        The last iterate, including its log-likelihood trace.
    condition1 : Condition1Report or None
        Attached when the uniqueness condition was checked and failed.
    """

    def __init__(self, message, result=None, condition1=None):
        super().__init__(message)
        self.result = result
        self.condition1 = condition1


class BootstrapInstabilityError(TreeAnovaError, ArithmeticError):
    """Too many bootstrap resamples failed to produce a usable statistic."""

    def __init__(self, message, failed: int, total: int):
        super().__init__(message)
        self.failed = failed
        self.total = total


class ConfigError(TreeAnovaError, ValueError):
    """A run configuration violates an invariant."""


class IngestionError(TreeAnovaError, ValueError):
    """An input table could not be parsed into grouped data."""

    def __init__(self, message, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
