"""Exception hierarchy shared by all modules."""


class CuetrackError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class DimensionError(CuetrackError, ValueError):
    exit_code = 2


class InvalidStepError(CuetrackError, ValueError):
    exit_code = 2


class StateCorruptionError(CuetrackError, ValueError):
    exit_code = 3


class NumericalError(CuetrackError, ArithmeticError):
    exit_code = 3


class TrainingError(CuetrackError, RuntimeError):
    exit_code = 4


class DataError(CuetrackError, ValueError):
    exit_code = 5


class SequencingError(CuetrackError, ValueError):
    exit_code = 6


class ConfigurationError(CuetrackError, ValueError):
    exit_code = 7


class ParseError(CuetrackError, ValueError):
    exit_code = 8

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ParseError):
    pass
