"""Exception hierarchy shared across the package."""


class HgfnetError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(HgfnetError):
    """Invalid or inconsistent run configuration."""


class DataError(HgfnetError):
    """Dataset files missing, malformed, or inconsistent."""


class IdxFormatError(DataError):
    """IDX file could not be parsed; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(HgfnetError):
    """A numerical invariant was violated (e.g. non-positive precision)."""
