"""Exception hierarchy shared across the package."""


class VolRegimeError(Exception):
    pass


class EmptyInputError(VolRegimeError, ValueError):
    pass


class PreconditionError(VolRegimeError, ValueError):
    pass


class ValidationError(VolRegimeError, ValueError):
    pass


class ParseError(VolRegimeError, ValueError):
    """Raised when text cannot be turned into the expected value.

    ``line`` is set for file parsing, ``raw`` for model replies.
    """

    def __init__(self, message, *, line=None, raw=None):
        super().__init__(message)
        self.line = line
        self.raw = raw


class DegenerateDataError(VolRegimeError, ValueError):
    def __init__(self, message, *, column=None):
        super().__init__(message)
        self.column = column


class ParameterError(VolRegimeError, ValueError):
    pass


class ConfigurationError(VolRegimeError):
    pass


class TransportError(VolRegimeError):
    pass


class ServiceError(VolRegimeError):
    def __init__(self, message, *, status):
        super().__init__(message)
        self.status = status


class PoolConstructionError(VolRegimeError):
    pass


class BacktestError(VolRegimeError):
    pass
