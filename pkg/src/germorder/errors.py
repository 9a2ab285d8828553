"""Exception types shared across the package."""


class GermOrderError(Exception):
    """Base class for errors raised by this package."""


class LawError(GermOrderError, ValueError):
    """An invalid law parameterization."""


class DomainError(GermOrderError, ValueError):
    """An argument outside the domain of a generating function."""


class TruncationBudgetExceeded(GermOrderError):
    """A series truncation could not reach the requested tail mass."""


class GridBudgetExceeded(GermOrderError):
    """A comparison grid would exceed the configured point budget."""


class PreconditionViolated(GermOrderError, ValueError):
    """An analytic criterion was called outside its hypotheses."""


class MaxIterationsExceeded(GermOrderError):
    """A fixed-point iteration did not converge.

    The last iterate and its residual are kept on the exception.
    """

    def __init__(self, message, last=None, residual=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class ProjectionInvalid(GermOrderError, ValueError):
    """A BRW does not project onto the requested finite quotient."""


class NotReducible(GermOrderError, ValueError):
    """A rumor model cannot be reduced to one station type."""


class NotFound(GermOrderError, KeyError):
    """Unknown catalogue entry."""


class SchemaError(GermOrderError, ValueError):
    """An experiment configuration failed validation."""
