"""Exception hierarchy shared by all modules.

The CLI maps :class:`ConfigError` to exit status 2 and :class:`NumericError`
to exit status 3.
"""


class IontfimError(Exception):
    """Base class for all package errors."""


class ConfigError(IontfimError, ValueError):
    """Invalid or incomplete run configuration."""


class NumericError(IontfimError):
    """A numerical procedure failed or its preconditions were violated."""


class ConvergenceError(NumericError):
    pass


class ChainUnstableError(NumericError):
    pass


class ResonanceError(NumericError):
    pass


class FitError(NumericError):
    pass


class NoSolutionError(NumericError):
    pass


class KrylovConvergenceError(ConvergenceError):
    pass


class StepBoundError(NumericError):
    pass


class UnderdeterminedError(NumericError):
    pass
