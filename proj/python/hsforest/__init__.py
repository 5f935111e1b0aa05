"""Horseshoe forests for causal survival analysis."""

from ._hsforest import (
    CalibrationError,
    ChainConfig,
    EstimationError,
    NumericalError,
    TailOverflowError,
    c_index,
    fit_causal,
    fit_forest,
    interval,
    simulate,
)

__all__ = [
    "CalibrationError",
    "ChainConfig",
    "EstimationError",
    "NumericalError",
    "TailOverflowError",
    "c_index",
    "fit_causal",
    "fit_forest",
    "interval",
    "simulate",
]
