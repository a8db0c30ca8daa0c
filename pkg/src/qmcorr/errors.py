"""Exception hierarchy shared across the package."""


class QMError(Exception):
    """Base class for all errors raised by qmcorr."""


class ValidationError(QMError, ValueError):
    """Input data violates a structural invariant (non-Hermitian, not normalized, ...)."""


class DimensionError(QMError, ValueError):
    """Operand dimensions are incompatible."""


class InconsistencyError(QMError):
    """Two routes to the same quantity disagree beyond tolerance."""


class TruncationError(QMError):
    """A truncated bosonic model is dominated by its top Fock levels."""
