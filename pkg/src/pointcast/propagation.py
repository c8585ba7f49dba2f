"""Message passing over the causal neighborhood graph.

Each layer scores edges from the current features, sends messages along
them, aggregates with the normalized weights, and applies a residual
layer-normalized update. Updates are synchronous: every point reads the
previous layer's features. Points with no valid neighbors receive a zero
message, so their update degrades to LayerNorm(h + update(0)).
"""

from __future__ import annotations

import numpy as np

from pointcast.diffcore import (
    ModelParams,
    Tensor,
    add,
    concat,
    flatten,
    gather_rows,
    layer_norm,
    reshape,
    scale_rows,
    segment_sum,
    sub,
)
from pointcast.encoder import PointCloud
from pointcast.graph import CausalNeighborhood, compute_weights
from pointcast.nets import MLP

LN_EPS = 1e-5


class PropagationLayer:
    """Parameters for one propagation step (untied across layers)."""

    def __init__(self, params: ModelParams, prefix: str, d_coord: int, d_model: int,
                 rng: np.random.Generator, use_displacement: bool = True):
        self.use_displacement = use_displacement
        d_rel = (d_coord if use_displacement else 0) + 2 * d_model
        d_msg_in = d_model + (d_coord if use_displacement else 0)
        self.score_mlp = MLP(params, f"{prefix}.score_mlp", d_rel, d_model, 1, rng)
        self.msg_mlp = MLP(params, f"{prefix}.msg_mlp", d_msg_in, d_model, d_model, rng)
        self.update_mlp = MLP(params, f"{prefix}.update_mlp", d_model, d_model, d_model, rng)
        self.norm_gain = params.add(f"{prefix}.norm_gain", np.ones(d_model))
        self.norm_bias = params.add(f"{prefix}.norm_bias", np.zeros(d_model))


def message(h_j: Tensor, dp: Tensor | None, layer: PropagationLayer) -> Tensor:
    """Single-edge message: msg_mlp(h_j ++ dp). Sender feature and relative
    position only; the receiver's feature does not enter."""
    row = reshape(h_j, (1, -1))
    if layer.use_displacement:
        row = concat([row, reshape(dp, (1, -1))], axis=1)
    return flatten(layer.msg_mlp(row))


def aggregate(messages: Tensor, weights: Tensor) -> Tensor:
    """Weighted sum of message rows, ascending index. Empty -> zero vector."""
    n, d = messages.data.shape
    if n == 0:
        return Tensor(np.zeros(d))
    summed = segment_sum(scale_rows(messages, weights),
                         np.zeros(n, dtype=np.int64), 1)
    return flatten(summed)


def update(h_i: Tensor, m_i: Tensor, layer: PropagationLayer) -> Tensor:
    """Residual layer-normalized update for one point."""
    mixed = add(reshape(h_i, (1, -1)),
                layer.update_mlp(reshape(m_i, (1, -1))))
    return flatten(layer_norm(mixed, layer.norm_gain, layer.norm_bias, eps=LN_EPS))


def propagate(cloud: PointCloud, nbhd: CausalNeighborhood,
              layers: list[PropagationLayer], collect: list | None = None) -> PointCloud:
    """Run all layers. collect, when given, records each layer's edge weights
    for inspection (sanity checks on normalization and masking)."""
    current = cloud
    for l_index, layer in enumerate(layers):
        weights = compute_weights(current, nbhd, layer.score_mlp,
                                  use_displacement=layer.use_displacement)
        if collect is not None:
            collect.append({
                "layer": l_index,
                "edge_dst": nbhd.edge_dst.copy(),
                "alpha": weights.alpha.data.copy(),
            })
        h_src = gather_rows(current.features, nbhd.edge_src)
        if layer.use_displacement:
            dp = sub(gather_rows(current.coords, nbhd.edge_dst),
                     gather_rows(current.coords, nbhd.edge_src))
            msg_in = concat([h_src, dp], axis=1)
        else:
            msg_in = h_src
        messages = layer.msg_mlp(msg_in)
        pooled = segment_sum(scale_rows(messages, weights.alpha),
                             nbhd.edge_dst, current.n_points())
        mixed = add(current.features, layer.update_mlp(pooled))
        h_next = layer_norm(mixed, layer.norm_gain, layer.norm_bias, eps=LN_EPS)
        current = PointCloud(coords=current.coords, features=h_next,
                             t=current.t, c=current.c, layer_index=l_index + 1)
    return current
