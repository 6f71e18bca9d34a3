"""Exception hierarchy shared across the package."""


class ApicalError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ApicalError, ValueError):
    pass


class ParameterError(ApicalError, ValueError):
    pass


class UsageError(ApicalError, ValueError):
    pass


class DataError(ApicalError, ValueError):
    pass


class FormatError(ApicalError, ValueError):
    """Malformed on-disk data. ``offset`` is the byte or line position, if known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(ApicalError, ValueError):
    pass


class DivergenceError(ApicalError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, trial=None):
        where = f"epoch {epoch}" if trial is None else f"trial {trial}, epoch {epoch}"
        super().__init__(f"non-finite loss at {where}")
        self.epoch = epoch
        self.trial = trial
