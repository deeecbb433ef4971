"""Exception hierarchy shared by all mcflab modules."""


class MCFError(Exception):
    """Base class for every error raised by mcflab."""


class GeometryError(MCFError, ValueError):
    """Invalid or degenerate discrete geometry."""


class DegenerateEdge(GeometryError):
    pass


class SelfIntersection(GeometryError):
    pass


class AxisViolation(GeometryError):
    pass


class TooCoarse(GeometryError):
    pass


class OffAxisCenter(GeometryError):
    pass


class DegenerateGeometry(GeometryError):
    pass


class PastExtinction(MCFError, ValueError):
    pass


class UnsupportedFactorization(MCFError, ValueError):
    pass


class DomainViolation(MCFError, ValueError):
    pass


class InvalidSpec(MCFError, ValueError):
    pass


class NonNegativeTime(MCFError, ValueError):
    pass


class StepTooLarge(MCFError, ValueError):
    pass


class NonBackwardTime(MCFError, ValueError):
    pass


class UncoveredTime(MCFError, LookupError):
    pass


class NotMeanConvex(MCFError, ValueError):
    pass


class NonPositiveDensity(MCFError, ValueError):
    pass


class InsufficientHistory(MCFError, LookupError):
    pass


class NeckTooShort(MCFError, ValueError):
    pass


class NoSeparatingNecks(MCFError):
    """Trigger fired but no admissible neck collection separates the
    trigger part from the thick part."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class UncontrolledInitialData(MCFError, ValueError):
    pass


class ConfigError(MCFError, ValueError):
    pass


class GridMismatch(MCFError, ValueError):
    pass
