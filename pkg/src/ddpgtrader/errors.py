"""Exception types shared across the package."""


class TraderError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TraderError):
    """A run configuration is missing required keys or contains bad values."""


class DataError(TraderError):
    """An input file is unreadable, malformed, or violates data invariants."""


class NumericError(TraderError):
    """A computation produced (or received) non-finite values."""
