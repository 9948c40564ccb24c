"""Exception hierarchy shared across the package."""


class AraeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AraeError, ValueError):
    """Inconsistent shapes, budgets or settings."""


class UsageError(AraeError, RuntimeError):
    """An operation was called in a state where it cannot run."""


class NumericError(AraeError, FloatingPointError):
    """A loss or gradient became non-finite."""


class DataError(AraeError):
    """Input data could not be parsed or is unsuitable."""


class IdxFormatError(DataError):
    """Malformed IDX file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


class ModelFileError(AraeError):
    """Base class for model file problems."""


class ModelMagicError(ModelFileError):
    pass


class ModelChecksumError(ModelFileError):
    pass


class ModelFormatError(ModelFileError):
    """Truncated file, unknown version or inconsistent layer table."""
