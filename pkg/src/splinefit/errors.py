"""Exception types raised across the package."""


class SplineFitError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(SplineFitError, ValueError):
    """A parameter value lies outside the knot vector domain."""


class RankDeficientError(SplineFitError, ArithmeticError):
    """The Gram matrix is only positive semidefinite."""


class OracleSizeError(SplineFitError, ValueError):
    """A dense oracle request exceeds the desk-scale size cap."""


class DivergenceError(SplineFitError, ArithmeticError):
    """An iterative fit blew up.

    The ``report`` attribute carries the last finite state as a
    :class:`~splinefit.fitting.FitReport` with ``diverged`` set.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
