"""Exception hierarchy shared by the pipeline, simulator and CLI."""


class TorchPilotError(Exception):
    """Base class for every error raised by torchpilot."""


class InvalidInputError(TorchPilotError, ValueError):
    pass


class DegenerateHullError(TorchPilotError):
    """All contour points are collinear, so the hull has no area."""


class FeatureUnavailableError(TorchPilotError):
    """A pool feature could not be computed from the current frame."""


class CalibrationError(TorchPilotError):
    pass


class ConfigError(TorchPilotError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ConfigError):
    pass
