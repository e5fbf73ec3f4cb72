"""Exception types shared across the package."""


class TwistcountError(Exception):
    """Base class for all package errors."""


class SingularCurveError(TwistcountError):
    """Raised when 4A^3 + 27B^2 = 0."""


class DomainError(TwistcountError):
    """Input violates a documented precondition (not on curve, bad gcd, ...)."""


class TorsionPointError(TwistcountError):
    """A torsion point was passed where a non-torsion point is required."""


class NotRationalTorsionError(TwistcountError):
    """A 2-torsion translation was requested for an irrational root."""


class DegenerateOrbitError(TwistcountError):
    """torsion_orbit was called on a point of x(E[2])."""


class ResourceBudgetError(TwistcountError):
    """A cost guard or memory budget was exceeded.

    ``partial`` optionally carries results completed before the guard fired.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
