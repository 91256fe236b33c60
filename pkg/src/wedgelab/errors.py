"""Exception hierarchy shared by all wedgelab modules."""


class WedgeLabError(Exception):
    """Base class for every error raised by wedgelab."""


class ArgumentError(WedgeLabError, ValueError):
    """An argument violates a documented precondition."""


class ScheduleError(ArgumentError):
    """A coefficient schedule (or a single matrix) fails validation."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class NumericalError(WedgeLabError, RuntimeError):
    """A numerical procedure did not converge or produced garbage."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class CertificationError(NumericalError):
    """No decay rate in the search ladder satisfied a Gaussian bound."""


class ConfigError(WedgeLabError):
    """An experiment config does not match its schema."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)
