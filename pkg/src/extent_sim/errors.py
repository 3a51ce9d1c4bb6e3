"""Exception hierarchy shared by every layer of the simulator."""


class ExtentSimError(Exception):
    """Base class for all simulator errors."""


class DomainError(ExtentSimError, ValueError):
    """An argument lies outside the mathematical domain of a model."""


class RegimeError(DomainError):
    """A model is evaluated outside the physical regime it describes."""


class UsageError(ExtentSimError, ValueError):
    """Caller-side misuse: bad shapes, unknown keys, invalid options."""


class ParseError(UsageError):
    """Malformed input text, with the offending location."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class CalibrationError(ExtentSimError):
    """Calibration targets cannot be met by the model."""
