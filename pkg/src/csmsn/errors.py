"""Exception hierarchy shared by every module."""


class CsmsnError(Exception):
    """Base class for all package errors."""


class ParameterError(CsmsnError, ValueError):
    """A parameter value violates its family constraints."""


class SkewnessRangeError(ParameterError):
    pass


class MomentUndefinedError(ParameterError):
    pass


class DataError(CsmsnError):
    """Malformed input data or a degenerate design."""


class ConfigError(CsmsnError):
    pass


class NumericError(CsmsnError, ArithmeticError):
    """Numerical failure (non-convergence, NaN, underflow of a region)."""

    def __init__(self, message, error_estimate=None, iteration=None):
        super().__init__(message)
        self.error_estimate = error_estimate
        self.iteration = iteration


class DegenerateRegionError(NumericError):
    pass
