"""Exception types shared across the package."""


class TransfallError(Exception):
    """Base class for all errors raised by transfall."""


class DataError(TransfallError):
    """Raised for unreadable, malformed or empty input data."""


class DimensionMismatch(TransfallError, ValueError):
    """Raised when arrays entering the same computation disagree in shape."""


class SolverError(TransfallError):
    """Raised when a numerical solve cannot produce a usable result."""


class ConfigError(TransfallError):
    """Raised for invalid scenario configuration files."""
