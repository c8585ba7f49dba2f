"""Forecasting for irregularly sampled multivariate time series.

Observations are encoded as points in a learned channel-time coordinate
space, wired into a causal nearest-neighbor graph, refined by relation-aware
message passing, and queried at arbitrary (time, channel) coordinates.
"""

from pointcast.data import (
    DatasetManifest,
    Normalizer,
    Observation,
    SplitSample,
    SynthSpec,
    fit_normalizer,
    load_dataset,
    make_sample,
    save_dataset,
    split_tvt,
    synth_generate,
)
from pointcast.estimator import PointGraphForecaster
from pointcast.model import ModelConfig, PointModel, VARIANTS
from pointcast.trainer import TrainConfig, TrainReport, aggregate_seeds, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "Normalizer",
    "Observation",
    "SplitSample",
    "SynthSpec",
    "fit_normalizer",
    "load_dataset",
    "make_sample",
    "save_dataset",
    "split_tvt",
    "synth_generate",
    "PointGraphForecaster",
    "ModelConfig",
    "PointModel",
    "VARIANTS",
    "TrainConfig",
    "TrainReport",
    "aggregate_seeds",
    "evaluate",
    "train",
    "__version__",
]
