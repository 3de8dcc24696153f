"""Exception types shared across the package."""


class TuningBandsError(Exception):
    """Base class for errors raised by this package."""


class DataError(TuningBandsError, ValueError):
    """Input data is malformed: bad rows, missing columns, non-finite scores."""


class ConfigError(TuningBandsError, ValueError):
    """An analysis configuration failed validation."""


class ConvergenceError(TuningBandsError, ArithmeticError):
    """A numeric routine did not converge."""


class UnsupportedShapeError(TuningBandsError, ValueError):
    """The Beta shape has no well-defined highest density interval."""


class EmptySampleError(DataError):
    """A sample with no scores was given where at least one is required."""


class TiesWarning(UserWarning):
    """Tied scores break the continuity assumption; bands become conservative."""


class VacuousBandWarning(UserWarning):
    """A band side is vacuous because a support bound is infinite."""


class ExtrapolationWarning(UserWarning):
    """Budgets past the sample size extrapolate beyond the data."""
