"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ValidationError / DataError
exit with 3, DegenerateError with 4.
"""


class PhscrnError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PhscrnError):
    """Invalid arguments or inconsistent metadata."""


class DataError(PhscrnError):
    """Malformed or unreadable data on disk."""


class DegenerateError(PhscrnError):
    """Numerically degenerate input (zero variance, empty aperture, ...)."""
