"""Exception types shared across the package."""


class CorrcastError(Exception):
    """Base class for all package errors."""


class ValidationError(CorrcastError):
    """Input data violates a structural invariant (bad CSV row, negative speed, ...)."""


class DegenerateCorrelationError(CorrcastError):
    """Pearson correlation requested on a zero-variance input."""


class NoMatchError(CorrcastError):
    """A window scan found nothing above the requested threshold."""


class SolverError(CorrcastError):
    """A correlation-completion solver failed (degenerate input, budget exceeded, ...)."""


class EmptyTreeError(CorrcastError):
    """Knowledge-tree construction ended with zero nodes even at the relaxation floor."""


class SerializationError(CorrcastError):
    """Malformed or version-incompatible serialized artifact."""


class DivergenceError(CorrcastError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
