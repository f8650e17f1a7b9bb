"""Exception hierarchy shared by all dslt_lab modules."""


class DsltLabError(Exception):
    """Base class for library errors."""


class OutOfRegime(DsltLabError, ValueError):
    """Parameters fall outside the regime a quantity is defined for."""


class DegenerateGeometry(DsltLabError, ArithmeticError):
    """A regularised covariance determinant came out non-positive."""


class NotConverged(DsltLabError, ArithmeticError):
    """A numerical procedure did not reach its tolerance.

    The partially converged result is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonFiniteEvaluation(DsltLabError, ArithmeticError):
    """An integrand returned NaN or inf at an interior node."""


class GridTooLarge(DsltLabError, MemoryError):
    """Dense Cholesky fallback would exceed the configured memory cap."""


class ResolutionViolation(DsltLabError, ValueError):
    """Grid too coarse for the kernel bandwidth (Delta^{2H}/eps above guard)."""


class NonFinitePath(DsltLabError, ValueError):
    """Path values contain NaN or inf."""


class TooFewSamples(DsltLabError, ValueError):
    """Not enough samples for a statistical test."""


class ConfigInvalid(DsltLabError, ValueError):
    """Configuration file failed validation; ``errors`` lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class EmbeddingFallback(UserWarning):
    """Circulant embedding had negative eigenvalues; Cholesky was used instead."""
