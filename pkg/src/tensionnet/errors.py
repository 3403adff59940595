"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigurationError/UsageError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class TensionNetError(Exception):
    pass


class ConfigurationError(TensionNetError):
    """Bad dimensions, invalid hyperparameters, contradictory flags."""


class UsageError(TensionNetError):
    """API misuse, e.g. backward before forward."""


class DataError(TensionNetError):
    """Malformed or invariant-violating input data."""


class NumericalError(TensionNetError):
    """Non-finite values encountered during computation."""
