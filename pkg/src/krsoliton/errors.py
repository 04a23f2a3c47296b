"""Exception hierarchy. The CLI maps each family to an exit code."""


class SolitonError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometryError(SolitonError, ValueError):
    """Inputs violate a precondition (bad geometry, wrong sign of mu, bad range)."""


class SolverFailure(SolitonError, RuntimeError):
    """A root bracket could not be found or an integrator gave up."""


class PositivityError(SolitonError):
    """The profile is not positive where a metric is required."""


class ClosingError(PositivityError):
    """A compact profile failed the closing condition at b1."""


class OutOfRangeError(SolitonError, ValueError):
    """Query outside a grid without asymptotic extension."""
