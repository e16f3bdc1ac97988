"""Exception hierarchy shared by every tpifm module."""


class TpifmError(Exception):
    """Base class for all package errors."""


class InputError(TpifmError, ValueError):
    """An argument is outside its valid domain."""


class UnsupportedTaskError(TpifmError, LookupError):
    """The task has no fitted per-task constants."""


class ConfigError(TpifmError, ValueError):
    """A scenario configuration is invalid."""


class TraceParseError(TpifmError, ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceValidationError(TpifmError, ValueError):
    def __init__(self, index: int, message: str, lineno: int | None = None):
        where = f"line {lineno}" if lineno is not None else f"event {index}"
        super().__init__(f"{where}: {message}")
        self.index = index
        self.lineno = lineno


class InsufficientDataError(TpifmError, ValueError):
    pass


class PreconditionError(TpifmError, ValueError):
    pass


class UnderdeterminedError(TpifmError, ValueError):
    pass


class UndefinedCorrelationError(TpifmError, ValueError):
    pass


class DegenerateError(TpifmError, ValueError):
    pass
