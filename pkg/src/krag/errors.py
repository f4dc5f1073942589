"""Common exception base for the package."""


class KragError(Exception):
    """Base class for every error raised by this package."""
