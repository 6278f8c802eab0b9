"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class EmclError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EmclError):
    """Invalid hyperparameters, shapes, or run configuration."""


class DataError(EmclError):
    """Malformed dataset files or contents that violate dataset invariants."""


class NumericError(EmclError):
    """Numeric degeneracy: zero vectors, vanishing aggregation weights,
    or non-finite values produced at runtime."""
