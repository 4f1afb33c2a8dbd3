"""Exception hierarchy shared by all chebdesign modules."""


class ChebDesignError(Exception):
    """Base class for all errors raised by chebdesign."""


class ParameterError(ChebDesignError, ValueError):
    """Invalid model or algorithm parameters."""


class DomainError(ChebDesignError, ValueError):
    """A point lies outside the design interval."""


class SingularityError(ChebDesignError, ArithmeticError):
    """A basis function or closed form is evaluated at a pole."""


class IterationError(ChebDesignError, RuntimeError):
    """An iterative method did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ChebyshevViolationError(ChebDesignError, RuntimeError):
    """The exchange step found fewer alternation points than required."""


class NegativeWeightError(ChebDesignError, ValueError):
    """The Elfving representation of a candidate design has negative mass."""


class RankError(ChebDesignError, ArithmeticError):
    """An information matrix is singular where a nonsingular one is needed."""


class EstimabilityError(ChebDesignError, ValueError):
    """The vector c is not in the range of the information matrix."""


class PreconditionError(ChebDesignError, ValueError):
    """A documented precondition of an operation does not hold."""


class InternalError(ChebDesignError, RuntimeError):
    """An internal consistency check failed."""
