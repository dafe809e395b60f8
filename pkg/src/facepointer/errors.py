"""Shared exception types."""


class InvalidInput(ValueError):
    """An argument violates an operation's preconditions."""


class DegeneratePatch(ValueError):
    """Patch has zero variance and cannot be normalized."""


class InvalidTemplate(ValueError):
    """Template carries non-positive variance entries or wrong shape."""


class NotCalibrated(RuntimeError):
    """Pointer update requested before calibration."""


class NotReady(RuntimeError):
    """Not enough buffered data to complete the operation."""


class NoLine(ValueError):
    """Line merge requested on an empty candidate list."""
