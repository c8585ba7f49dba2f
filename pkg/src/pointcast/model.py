"""Full forecasting model: encode, build graph, propagate, answer queries."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from pointcast.diffcore import ModelParams, Tensor, mse, no_grad
from pointcast.encoder import Encoder, FixedCoordEncoder
from pointcast.errors import EmptyInputError, ValidationError
from pointcast.graph import build_structure
from pointcast.predictor import Predictor, predict_queries
from pointcast.propagation import PropagationLayer, propagate

VARIANTS = (
    "full",
    "no_learned_coords",
    "no_adaptive_graph",
    "no_relation_aware",
    "mean_pooling",
)


@dataclass(frozen=True)
class ModelConfig:
    n_channels: int
    d_c: int = 8
    d_t: int = 8
    d_model: int = 64
    k_neighbors: int = 8
    k_query: int | None = None
    n_layers: int = 2
    variant: str = "full"

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValidationError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        for field_name in ("n_channels", "d_c", "d_t", "d_model", "k_neighbors",
                           "n_layers"):
            if getattr(self, field_name) < 1:
                raise ValidationError(f"{field_name} must be >= 1")
        if self.k_query is not None and self.k_query < 1:
            raise ValidationError("k_query must be >= 1 when given")

    def effective_k_query(self) -> int:
        return self.k_query if self.k_query is not None else self.k_neighbors

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class PointModel:
    """Composed model. Parameter registration order is fixed by construction
    order, which makes checkpoints and seeding reproducible."""

    def __init__(self, config: ModelConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.params = ModelParams()
        rng = np.random.default_rng(self.seed)
        d_coord = config.d_c + config.d_t
        if config.variant == "no_learned_coords":
            self.encoder = FixedCoordEncoder(self.params, config.n_channels,
                                             config.d_c, config.d_t,
                                             config.d_model, rng)
        else:
            self.encoder = Encoder(self.params, config.n_channels, config.d_c,
                                   config.d_t, config.d_model, rng)
        use_disp = config.variant != "no_relation_aware"
        self.layers = [
            PropagationLayer(self.params, f"propagation.layer{l}", d_coord,
                             config.d_model, rng, use_displacement=use_disp)
            for l in range(config.n_layers)
        ]
        self.predictor = Predictor(self.params, d_coord, config.d_model, rng,
                                   mean_pool=(config.variant == "mean_pooling"))
        self.time_metric_graph = config.variant == "no_adaptive_graph"

    def forward_cloud(self, sample, collect: list | None = None):
        """Encode history and run all propagation layers once."""
        cloud0 = self.encoder.encode_history(sample)
        nbhd = build_structure(cloud0, self.config.k_neighbors,
                               time_metric=self.time_metric_graph)
        cloud = propagate(cloud0, nbhd, self.layers, collect=collect)
        return cloud, nbhd

    def forward_queries(self, sample, t_q, c_q, collect: list | None = None) -> Tensor:
        """Normalized-scale predictions for explicit query coordinates."""
        t_q = np.asarray(t_q, dtype=np.float64)
        c_q = np.asarray(c_q, dtype=np.int64)
        if t_q.size == 0:
            raise EmptyInputError(f"sample {sample.series_id!r}: no queries given")
        cloud, _ = self.forward_cloud(sample, collect=collect)
        q_coords = self.encoder.encode_queries(t_q, c_q)
        return predict_queries(cloud, q_coords, self.config.effective_k_query(),
                               self.predictor, collect=collect)

    def predict_query(self, sample, t_q: float, c_q: int) -> float:
        """Single-query convenience wrapper (normalized scale)."""
        with no_grad():
            out = self.forward_queries(sample, [t_q], [c_q])
        return float(out.data[0])

    def loss_on_sample(self, sample, collect: list | None = None) -> Tensor:
        """Mean squared error over the sample's own query set."""
        t_q, x_q, c_q = sample.query_arrays()
        preds = self.forward_queries(sample, t_q, c_q, collect=collect)
        return mse(preds, Tensor(x_q))

    def predict_sample(self, sample, t_q=None, c_q=None) -> np.ndarray:
        """Inference without taping. Defaults to the sample's own queries."""
        if t_q is None:
            t_q, _, c_q = sample.query_arrays()
        with no_grad():
            out = self.forward_queries(sample, t_q, c_q)
        return out.data.copy()

    def final_features(self, sample) -> np.ndarray:
        """h at the last layer, for invariance checks."""
        with no_grad():
            cloud, _ = self.forward_cloud(sample)
        return cloud.features.data.copy()
