"""Observation encoding.

Each history observation (t, x, c) becomes a coordinate p = e_c ++ time(t)
and an initial feature h = value(x). Coordinates depend only on (t, c), so
the graph structure built from them is independent of observed values.
Queries share the same coordinate encoders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointcast.diffcore import ModelParams, Tensor, concat, flatten, gather_rows
from pointcast.errors import EmptyHistoryError, ValidationError
from pointcast.nets import MLP


@dataclass
class PointCloud:
    """History points of one sample at some propagation depth."""

    coords: Tensor      # (n, d_c + d_t)
    features: Tensor    # (n, d_model)
    t: np.ndarray       # (n,) timestamps, kept for causal masking
    c: np.ndarray       # (n,) channel indices
    layer_index: int = 0

    def n_points(self) -> int:
        return int(self.t.shape[0])


class EncoderBase:
    n_channels: int

    def coords_for(self, t: np.ndarray, c: np.ndarray) -> Tensor:
        raise NotImplementedError

    def encode_history(self, sample) -> PointCloud:
        t, x, c = sample.history_arrays()
        if t.size == 0:
            raise EmptyHistoryError(f"sample {sample.series_id!r} has an empty history")
        coords = self.coords_for(t, c)
        features = self.value_mlp(Tensor(x.reshape(-1, 1)))
        return PointCloud(coords=coords, features=features, t=t, c=c, layer_index=0)

    def encode_queries(self, t: np.ndarray, c: np.ndarray) -> Tensor:
        return self.coords_for(np.asarray(t, dtype=np.float64),
                               np.asarray(c, dtype=np.int64))

    def encode_query(self, t_q: float, c_q: int) -> Tensor:
        return flatten(self.encode_queries([t_q], [c_q]))

    def _check_channels(self, c: np.ndarray):
        if c.size and (c.min() < 0 or c.max() >= self.n_channels):
            raise ValidationError(
                f"channel index outside [0, {self.n_channels}): {int(c.max())}"
            )


class Encoder(EncoderBase):
    """Learned coordinate and feature encoders (the full-model path)."""

    def __init__(self, params: ModelParams, n_channels: int, d_c: int, d_t: int,
                 d_model: int, rng: np.random.Generator):
        self.n_channels = n_channels
        self.channel_embedding = params.add(
            "encoder.channel_embedding", rng.normal(0.0, 0.02, size=(n_channels, d_c))
        )
        self.time_mlp = MLP(params, "encoder.time_mlp", 1, d_model, d_t, rng)
        self.value_mlp = MLP(params, "encoder.value_mlp", 1, d_model, d_model, rng)

    def coords_for(self, t: np.ndarray, c: np.ndarray) -> Tensor:
        self._check_channels(c)
        chan = gather_rows(self.channel_embedding, c)
        time_feat = self.time_mlp(Tensor(t.reshape(-1, 1)))
        return concat([chan, time_feat], axis=1)


class FixedCoordEncoder(EncoderBase):
    """Frozen coordinates: one-hot channels and a sinusoid ladder over time.

    The channel part is one-hot(c) padded or truncated to d_c; the time part
    is sin(2*pi*t/period) over d_t periods spaced geometrically across
    [1e-2, 1] in normalized time. Only the value encoder keeps parameters.
    """

    def __init__(self, params: ModelParams, n_channels: int, d_c: int, d_t: int,
                 d_model: int, rng: np.random.Generator):
        self.n_channels = n_channels
        self.periods = np.geomspace(1e-2, 1.0, d_t)
        onehot = np.eye(n_channels)
        if d_c >= n_channels:
            self.channel_table = np.pad(onehot, ((0, 0), (0, d_c - n_channels)))
        else:
            self.channel_table = onehot[:, :d_c]
        self.value_mlp = MLP(params, "encoder.value_mlp", 1, d_model, d_model, rng)

    def coords_for(self, t: np.ndarray, c: np.ndarray) -> Tensor:
        self._check_channels(c)
        chan = self.channel_table[c]
        time_feat = np.sin(2.0 * np.pi * t.reshape(-1, 1) / self.periods[None, :])
        return Tensor(np.concatenate([chan, time_feat], axis=1))
