"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class FloorgenError(Exception):
    """Base class for every error raised by this package."""


class ParseError(FloorgenError):
    def __init__(self, location: str, reason: str):
        super().__init__(f"{location}: {reason}")
        self.location = location
        self.reason = reason


class UnsupportedFormat(FloorgenError):
    pass


class EmptyCloud(FloorgenError):
    pass


class TooFewPoints(FloorgenError):
    pass


class NonPositiveBinSize(FloorgenError):
    pass


class NoPeaksFound(FloorgenError):
    """The z histogram has no floor/ceiling slab pair."""


class FrameMismatch(FloorgenError):
    pass


class LengthMismatch(FloorgenError):
    pass


class OutOfRangeLabel(FloorgenError):
    def __init__(self, row: int, value):
        super().__init__(f"row {row}: label {value!r} outside [0, 5]")
        self.row = row
        self.value = value


class DegenerateWall(FloorgenError):
    pass


class InvalidSpec(FloorgenError):
    pass


class StageError(FloorgenError):
    """Wraps an error with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
