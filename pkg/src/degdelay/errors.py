"""Exception hierarchy.  The CLI maps these onto exit codes."""


class DegDelayError(Exception):
    """Base class for all package errors."""


class ConfigError(DegDelayError):
    pass


class RejectedCoefficient(ConfigError):
    pass


class DivergentIntegral(ConfigError):
    pass


class GridError(ConfigError):
    pass


class BadControlWindow(ConfigError):
    pass


class OffGridTime(DegDelayError):
    pass


class SolverError(DegDelayError):
    pass


class SingularSolve(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NonSymmetricOperator(SolverError):
    pass


class RoundTripMismatch(SolverError):
    pass


class OutOfWindow(DegDelayError):
    pass


class ZeroDenominator(DegDelayError):
    pass


class DegenerateDenominator(DegDelayError):
    pass
