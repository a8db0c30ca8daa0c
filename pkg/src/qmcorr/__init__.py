"""Measurement schemes, instruments and correlation measures for finite-dimensional quantum systems."""

from .errors import DimensionError, InconsistencyError, QMError, TruncationError, ValidationError
from .quantum import Effect, Povm, State
from .scheme import MeasurementScheme, ReadingScale, measure, measured_povm
from .transformer import StateTransformer, Verdict

__all__ = [
    "DimensionError",
    "Effect",
    "InconsistencyError",
    "MeasurementScheme",
    "Povm",
    "QMError",
    "ReadingScale",
    "State",
    "StateTransformer",
    "TruncationError",
    "ValidationError",
    "Verdict",
    "measure",
    "measured_povm",
]
