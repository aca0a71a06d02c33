"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GaitReconError(Exception):
    exit_code = 1


class MissingInputError(GaitReconError):
    exit_code = 2


class ParseError(GaitReconError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DataError(GaitReconError):
    """Non-finite or otherwise invalid numeric input."""

    exit_code = 3


class AlignmentError(DataError):
    """Motion and IMU streams disagree in length or rate."""


class NumericalError(GaitReconError):
    exit_code = 4


class SingularModelError(NumericalError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConditioningError(NumericalError):
    pass


class TrackingLost(NumericalError):
    pass


class SegmentationError(GaitReconError):
    exit_code = 5

    def __init__(self, message, frame_range=None):
        if frame_range is not None:
            message = f"{message} (frames {frame_range[0]}..{frame_range[1]})"
        super().__init__(message)
        self.frame_range = frame_range
