"""Exception types shared across the package."""


class SingwarpError(Exception):
    """Base class for all package errors."""


class DomainError(SingwarpError):
    """An elementary function was evaluated outside its domain
    (division by zero, log/sqrt of a non-positive value, 0**k with k < 0)."""


class DimensionMismatch(SingwarpError):
    """Chart dimensions of the operands disagree, or a coordinate index
    is out of range for the evaluation point."""


class SingularBaseMetric(SingwarpError):
    """A base metric that must be invertible is singular (to rank tolerance)
    at the requested point."""


class NotAnnihilator(SingwarpError):
    """A 1-form that the radical-stationarity hypothesis requires to vanish
    on the metric's null space does not.  Carries the offending point."""

    def __init__(self, message, point=None, residual=None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(x) for x in point)
        self.residual = residual


class UnsupportedCase(SingwarpError):
    """The slot-origin pattern is not covered by any registered
    factor-wise formula."""


class UnknownFixture(SingwarpError):
    """A fixture id is not present in the catalog."""


class UnknownClause(SingwarpError):
    """A clause or suite id is not registered."""
