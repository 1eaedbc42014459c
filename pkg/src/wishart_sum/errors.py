"""Exception hierarchy shared by every module of the package."""


class WishartSumError(Exception):
    """Base class for all errors raised by :mod:`wishart_sum`."""


class ValidationError(WishartSumError, ValueError):
    """Invalid model parameters, configuration or input data."""


class DimensionError(ValidationError):
    """Matrix shapes that do not fit the requested operation."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class NumericalFailure(WishartSumError, ArithmeticError):
    """A computation could not reach a trustworthy result.

    Raised instead of returning a value whose estimated number of
    significant digits is below the acceptance threshold, or when an
    iterative procedure (quadrature, continued fraction) fails to converge.
    """


class ConditioningError(NumericalFailure):
    """Distinct-covariance formula requested for near-degenerate values.

    The confluent (repeated-value) density or capacity must be used instead.
    """
