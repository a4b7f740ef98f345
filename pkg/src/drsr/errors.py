"""Exception hierarchy shared by every drsr module."""


class DRSRError(Exception):
    """Base class for all errors raised by drsr."""


class ParseError(DRSRError, ValueError):
    """Malformed input text. ``lineno`` is 1-based, or None when unknown."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class InvalidSessionError(DRSRError, ValueError):
    pass


class DomainError(DRSRError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(DomainError):
    pass


class DegenerateSampleError(DRSRError, ValueError):
    pass


class NumericError(DRSRError, ArithmeticError):
    """A non-finite value appeared during computation."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)


class ConfigError(DRSRError, ValueError):
    pass
