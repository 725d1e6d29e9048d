"""Discretized Moyal-plane operators, Hermite representation and Dixmier-trace estimators."""

from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    AlignmentError,
    ConfigurationError,
    DimensionError,
    DomainError,
    MoyalLabError,
    NumericalError,
    ResolutionError,
    ResourceError,
)
from .plane import GridOperator, GridSpec, PlaneContext, Symbol, ThetaMatrix, make_theta, quantize
from .traces import EstimatorWindow, SingularSpectrum, TraceEstimate, dixmier_estimate

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ConfigurationError", "DimensionError", "DomainError", "EstimatorWindow",
    "ExperimentConfig", "GridOperator", "GridSpec", "MoyalLabError", "NumericalError", "PlaneContext",
    "ResolutionError", "ResourceError", "SingularSpectrum", "Symbol", "ThetaMatrix", "TraceEstimate",
    "dixmier_estimate", "load_config", "make_theta", "parse_config", "quantize",
]
