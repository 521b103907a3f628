"""Adiabatic rank-one activations, avoided crossings and entanglement transfer."""

from .errors import (
    AdiabentError,
    AmbiguousRegionError,
    DivergenceError,
    NumericalError,
    PoleError,
    SingularError,
    UnsupportedPredictionError,
    ValidationError,
)

__version__ = "0.1.0"
