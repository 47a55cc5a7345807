"""Federated-learning data-poisoning lab.

Simulates label-flipping attacks on a small federated classifier, records
every round as JSON, and analyzes the resulting per-class F1 utility and
3-D PCA signatures of client update deltas.
"""

from fedshadow.errors import (
    AggregationError,
    AnalysisError,
    ConfigError,
    FedShadowError,
    NotFoundError,
    NumericDivergenceError,
    RoundsLoadError,
    SequencingError,
    StorageError,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "AnalysisError",
    "ConfigError",
    "FedShadowError",
    "NotFoundError",
    "NumericDivergenceError",
    "RoundsLoadError",
    "SequencingError",
    "StorageError",
    "__version__",
]
