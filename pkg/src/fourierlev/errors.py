"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies rather than bare ValueError.
"""


class FourierLevError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(FourierLevError, ValueError):
    """Malformed arguments: bad shapes, out-of-range cuts, negative horizons."""


class ConfigError(FourierLevError, ValueError):
    """A configuration file or CLI override could not be interpreted."""


class DataError(FourierLevError):
    """Input data could not be loaded or failed validation."""


class DegenerateValueError(FourierLevError, ArithmeticError):
    """A computation produced a value outside its mathematically valid range.

    Examples: a vol-of-vol estimate that is not strictly positive where a
    ratio needs it, a control variate with zero sample variance, or a
    spectral sum whose imaginary part is too large to trust.
    """
