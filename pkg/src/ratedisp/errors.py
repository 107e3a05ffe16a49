"""Exception hierarchy shared by all modules."""


class RateDistortionError(Exception):
    """Base class for every error raised by this package."""


class InputError(RateDistortionError, ValueError):
    pass


class NonPositiveMass(InputError):
    pass


class NotNormalized(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class DomainError(InputError):
    pass


class DOutOfRange(InputError):
    pass


class RateBelowRdf(InputError):
    pass


class StepTooLarge(InputError):
    pass


class CapExceeded(RateDistortionError):
    """A combinatorial object is larger than the configured cap."""


class AtlasTooLarge(CapExceeded):
    pass


class GridCapExceeded(CapExceeded):
    pass


class EnumerationTooLarge(CapExceeded):
    pass


class SearchSpaceTooLarge(CapExceeded):
    pass


class SolverError(RateDistortionError):
    pass


class NoConvergence(SolverError):
    pass


class SolverFailure(SolverError):
    pass


class ExponentSolverFailure(SolverError):
    pass


class PoorFit(SolverError):
    pass


class Infeasible(RateDistortionError):
    """No source distribution on the alphabet reaches the requested rate."""


class ZeroVariance(RateDistortionError):
    pass


class Unreachable(RateDistortionError):
    pass


class ConfigParse(RateDistortionError):
    pass
