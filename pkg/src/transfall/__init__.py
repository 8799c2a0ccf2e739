"""Transfer learning for accelerometer activity recognition.

Target features are moment-matched to the source, source samples are
reweighted by kernel mean matching, target labels are estimated with a
weighted kernel ridge regressor, and a logistic model is trained on the
result.
"""

from . import data, kernel, kmm, label_transfer, model_generation, vertical
from .errors import ConfigError, DataError, DimensionMismatch, SolverError, TransfallError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionMismatch",
    "SolverError",
    "TransfallError",
    "data",
    "kernel",
    "kmm",
    "label_transfer",
    "model_generation",
    "vertical",
]
