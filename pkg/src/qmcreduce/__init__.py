"""Data reduction for regression: QMC-averaging, supercompress and QMC-Voronoi."""

from ._accel import BACKEND
from .errors import (
    DegenerateSplitError,
    DimensionError,
    FormatError,
    LengthError,
    ParameterError,
    QmcReduceError,
    RangeError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DegenerateSplitError",
    "DimensionError",
    "FormatError",
    "LengthError",
    "ParameterError",
    "QmcReduceError",
    "RangeError",
    "ShapeError",
    "__version__",
]
