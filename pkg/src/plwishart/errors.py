"""Exception hierarchy shared by every module."""


class PLWishartError(Exception):
    """Base class for all library errors."""


class DomainError(PLWishartError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(PLWishartError, ValueError):
    """The deformed measure is not integrable for the requested parameters."""


class MomentDivergenceError(PLWishartError, ValueError):
    """A requested moment does not exist for the given parameters."""


class AccuracyError(PLWishartError, ArithmeticError):
    """A series or quadrature failed to reach the requested tolerance."""


class NumericalError(PLWishartError, ArithmeticError):
    """Root finding or linear algebra failed."""


class UnsupportedCaseError(PLWishartError, NotImplementedError):
    """No closed form is available for the requested (beta, nu) combination."""


class DegenerateDataError(PLWishartError, ValueError):
    """Input data cannot be fitted (constant columns, identical eigenvalues)."""


class InternalConsistencyError(PLWishartError, AssertionError):
    """A structural identity that must hold exactly was violated."""
