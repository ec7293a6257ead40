class CatError(Exception):
    """Base class for all errors raised by catfair."""


class ConfigError(CatError, ValueError):
    pass


class EmptyRequestError(CatError, ValueError):
    pass


class InsufficientSeedsError(CatError, ValueError):
    pass


class SignatureConflictError(CatError, ValueError):
    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = tuple(cells)


class UnknownSignatureError(CatError, KeyError):
    pass


class ParseError(CatError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedMetricError(CatError, ValueError):
    """A metric has no defined value for the given inputs (rendered as a dash)."""


class TieError(UndefinedMetricError):
    pass
