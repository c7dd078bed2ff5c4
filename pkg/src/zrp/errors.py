"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, NumericError (and
subclasses) -> 2, CapExceededError -> 3.
"""


class ZRPError(Exception):
    """Base class for package errors."""


class ConfigError(ZRPError):
    """Invalid or inconsistent configuration input."""


class NumericError(ZRPError):
    """A numerical routine failed to meet its contract."""


class NonConvergenceError(NumericError):
    """An iterative solver exhausted its iteration budget."""


class TailMassError(NumericError):
    """A truncated distribution left more tail mass than allowed."""


class CapExceededError(ZRPError):
    """A requested enumeration or table exceeds the configured cap."""
