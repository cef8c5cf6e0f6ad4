"""Exception hierarchy shared by all modules."""


class ANNRError(Exception):
    pass


class InvalidInputError(ANNRError, ValueError):
    pass


class DegenerateSimplexError(ANNRError):
    """Raised when a simplex is too flat for a trustworthy circumsphere."""


class NumericalError(ANNRError, ArithmeticError):
    pass


class DuplicatePointError(InvalidInputError):
    pass


class ConfigurationError(ANNRError, ValueError):
    pass


class EvaluationError(ANNRError):
    """A target function failed to produce a finite value.

    ``raw`` carries the offending response (or exception text) and
    ``point`` the input that triggered it, when known.
    """

    def __init__(self, message, raw=None, point=None):
        super().__init__(message)
        self.raw = raw
        self.point = point


class InitializationError(EvaluationError):
    pass


class StalledEngineError(ANNRError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RunError(ANNRError):
    """Wraps a failure during a run; ``trace`` keeps everything recorded so far."""

    def __init__(self, message, trace=None, cause=None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause
