"""Active nearest neighbor regression on an approximate Delaunay triangulation."""

from .engine import ANNR, EngineConfig, RunTrace, initialize, nnr_predict, resolve_lambda, run
from .exceptions import (
    ANNRError,
    ConfigurationError,
    DegenerateSimplexError,
    DuplicatePointError,
    EvaluationError,
    InitializationError,
    InvalidInputError,
    NumericalError,
    RunError,
    StalledEngineError,
)
from .geometry import BoundingBox
from .spatial_index import Dataset, SpatialIndex
from .testbed import TargetFunction, TestSet, builtin, make_test_set, mae, norm_histogram

__version__ = "0.1.0"
