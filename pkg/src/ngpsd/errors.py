class PsdError(Exception):
    """Base class for errors raised by ngpsd."""


class ParameterError(PsdError, ValueError):
    pass


class FormatError(PsdError, ValueError):
    pass


class PulseParseError(FormatError):
    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class DiscriminationFailure(PsdError):
    """A single pulse yields no discrimination factor (e.g. no zero crossing)."""
