"""Exception hierarchy shared across the package."""


class EkDesignError(Exception):
    """Base class for all package errors."""


class DomainError(EkDesignError, ValueError):
    """Argument outside the domain of a numerical function."""


class ConvergenceError(EkDesignError, ArithmeticError):
    """A truncated series or iteration failed to reach its tolerance."""


class SingularMatrixError(EkDesignError, ArithmeticError):
    """A matrix that must be positive definite could not be factorized."""


class DuplicatePointError(EkDesignError, ValueError):
    """A design or point list contains a replicated location."""


class NonEstimableError(EkDesignError):
    """The design cannot estimate the covariance parameters."""


class FitError(EkDesignError):
    """Maximum-likelihood fitting failed for every candidate."""


class DesignMismatchError(EkDesignError, ValueError):
    """A design document does not belong to the grid it is used with."""
