"""Exception hierarchy shared by the solver, loaders and CLI."""


class VaxctlError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(VaxctlError, ValueError):
    """A parameter violates its documented invariant."""


class InfeasibleDemographicsError(InvalidParameterError):
    """Exposed + infected + recovered exceeds the group total."""


class ScenarioParseError(VaxctlError, ValueError):
    """A scenario or series file could not be parsed."""


class DivergenceError(VaxctlError, ArithmeticError):
    """A non-finite value appeared during integration.

    ``node`` is the first grid index holding a bad value and ``iteration`` is
    the sweep index when raised from inside the optimizer.
    """

    def __init__(self, message, node=None, iteration=None):
        super().__init__(message)
        self.node = node
        self.iteration = iteration
