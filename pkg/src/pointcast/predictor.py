"""Query-point regression.

A query (t, c) is embedded with the shared coordinate encoders, matched to
its K nearest history points, and scored against each of them; the weighted
sum of value-transformed neighbor features feeds the regression head. All
history points precede the query in time, so no causal mask is needed here.
"""

from __future__ import annotations

import numpy as np

from pointcast.diffcore import (
    ModelParams,
    Tensor,
    concat,
    flatten,
    gather_rows,
    scale_rows,
    segment_softmax,
    segment_sum,
    sub,
)
from pointcast.encoder import PointCloud
from pointcast.errors import EmptyHistoryError
from pointcast.graph import _knn_rows
from pointcast.nets import MLP


class Predictor:
    """Query scoring, value transform, and regression head parameters."""

    def __init__(self, params: ModelParams, d_coord: int, d_model: int,
                 rng: np.random.Generator, mean_pool: bool = False):
        self.mean_pool = mean_pool
        if not mean_pool:
            self.query_score_mlp = MLP(params, "predictor.query_score_mlp",
                                       d_coord + d_model, d_model, 1, rng)
        self.value_mlp = MLP(params, "predictor.value_mlp", d_model, d_model,
                             d_model, rng)
        self.head_mlp = MLP(params, "predictor.head_mlp", d_model, d_model, 1, rng)


def query_neighbors(q_coords: np.ndarray, coords: np.ndarray, k: int):
    """K nearest history points per query, ties by smaller index.

    Returns flat (q_dst, src) edge arrays grouped by query in ascending
    order; every query gets exactly min(k, n) edges.
    """
    n = coords.shape[0]
    m = q_coords.shape[0]
    if n == 0:
        raise EmptyHistoryError("query prediction needs at least one history point")
    diff = q_coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    k_eff = min(k, n)
    idx, _ = _knn_rows(dist, k_eff)
    q_dst = np.repeat(np.arange(m, dtype=np.int64), k_eff)
    src = idx.reshape(-1).astype(np.int64)
    return q_dst, src


def predict_queries(cloud: PointCloud, q_coords: Tensor, k: int,
                    predictor: Predictor, collect: list | None = None) -> Tensor:
    """Predictions for a batch of query coordinates, normalized scale."""
    m = q_coords.data.shape[0]
    q_dst, src = query_neighbors(q_coords.data, cloud.coords.data, k)
    h_src = gather_rows(cloud.features, src)
    if predictor.mean_pool:
        # Uniform fusion: constant weights carry no parameters and no grad.
        k_eff = src.shape[0] // m
        alpha = Tensor(np.full(src.shape[0], 1.0 / k_eff))
    else:
        dq = sub(gather_rows(q_coords, q_dst), gather_rows(cloud.coords, src))
        scores = flatten(predictor.query_score_mlp(concat([dq, h_src], axis=1)))
        alpha = segment_softmax(scores, q_dst)
    if collect is not None:
        collect.append({"layer": "query", "edge_dst": q_dst.copy(),
                        "alpha": alpha.data.copy()})
    values = predictor.value_mlp(cloud.features)
    v_src = gather_rows(values, src)
    fused = segment_sum(scale_rows(v_src, alpha), q_dst, m)
    return flatten(predictor.head_mlp(fused))
