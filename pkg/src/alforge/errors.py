"""Exception hierarchy shared across the package."""


class AlforgeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AlforgeError, ValueError):
    """An input, file, or configuration value violates a documented invariant."""


class ConfigError(AlforgeError, ValueError):
    """A run configuration is malformed or internally inconsistent."""


class NumericError(AlforgeError, ArithmeticError):
    """A numerical routine produced a non-finite value."""


class AnalysisError(AlforgeError, ValueError):
    """Result tables cannot be paired or aggregated as requested."""
