"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data/format
errors exit 2, integrity errors exit 3.
"""


class ConvdescError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ConvdescError, ValueError):
    """An argument violates an operation's preconditions."""


class FormatError(ConvdescError):
    """A file or directory does not match its declared layout."""


class IntegrityError(ConvdescError):
    """Stored data fails its checksum or structural validation."""


class ConfigurationError(ConvdescError):
    """A run configuration is incomplete or inconsistent."""
