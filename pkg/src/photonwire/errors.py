"""Exception types shared across the package.

The CLI maps these onto process exit codes (config error -> 2,
numeric failure -> 3, invariant violation -> 4).
"""


class PhotonwireError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PhotonwireError):
    """Invalid configuration: bad field values, unknown keys, unusable sweeps."""


class NumericError(PhotonwireError):
    """A numerical routine failed to converge or lost too much precision."""


class InvariantViolation(PhotonwireError):
    """An internal consistency check (normalization, monotonicity, ...) failed."""
