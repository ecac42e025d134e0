"""Exception hierarchy shared across the package."""


class GhostNormError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(GhostNormError, ValueError):
    pass


class GroupingError(GhostNormError, ValueError):
    pass


class DegenerateGroupError(GroupingError):
    pass


class SlicingError(GhostNormError, ValueError):
    pass


class DomainError(GhostNormError, ValueError):
    pass


class ContractError(GhostNormError, ValueError):
    """A cache, gradient or input does not match the call that produced it."""


class UninitializedStatsError(GhostNormError, RuntimeError):
    pass


class UnsupportedKindError(GhostNormError, ValueError):
    pass


class DataError(GhostNormError, ValueError):
    pass


class FormatError(DataError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DegenerateDataError(DataError):
    pass


class ConfigError(GhostNormError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key path."""

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
