"""Exception hierarchy shared by all modules."""


class AxonError(Exception):
    """Base class for every error raised by this package."""


class RankDeficient(AxonError):
    pass


class DegenerateDirection(AxonError):
    """The candidate basis vector lies (numerically) in the current span."""


class NoAscent(AxonError):
    """Every restart of the inner solver ended with a zero objective."""


class NotReLU(AxonError):
    pass


class DomainError(AxonError, ValueError):
    pass


class ZeroNorm(AxonError):
    pass


class ModelCorrupt(AxonError):
    pass


class SchemaError(AxonError):
    """Malformed model file. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericalBlowup(AxonError):
    def __init__(self, message, restart=None):
        super().__init__(message if restart is None else f"restart {restart}: {message}")
        self.restart = restart


class AllDiverged(AxonError):
    pass
