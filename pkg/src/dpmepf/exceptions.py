"""Exception hierarchy shared by the library and the CLI."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent."""


class CalibrationError(RuntimeError):
    """Noise calibration could not bracket a solution."""


class TrainingError(RuntimeError):
    """Generator training diverged."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class FormatError(ValueError):
    """A serialized artifact is malformed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedVersionError(FormatError):
    """A serialized artifact declares a format version we cannot read."""
