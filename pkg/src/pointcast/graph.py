"""Neighborhood construction and per-layer edge weighting.

Structure is two-step: K nearest candidates by coordinate distance, then a
causal filter keeping only neighbors at or before the target's timestamp.
Candidates are chosen before masking, so early points may end up with fewer
than K valid neighbors (possibly none). Edges are stored flat, grouped by
destination in ascending order, which the segment ops rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointcast.diffcore import (
    Tensor,
    concat,
    flatten,
    gather_rows,
    segment_softmax,
    sub,
)
from pointcast.encoder import PointCloud
from pointcast.errors import ValidationError


@dataclass
class CausalNeighborhood:
    """Fixed per-forward-pass graph over one sample's history points."""

    n_points: int
    k: int
    cand_idx: np.ndarray    # (n, k_eff) candidate indices, ascending distance
    cand_dist: np.ndarray   # (n, k_eff) matching distances
    edge_dst: np.ndarray    # (E,) destination point per valid edge, ascending
    edge_src: np.ndarray    # (E,) source point per valid edge
    edge_dist: np.ndarray   # (E,) cached distances

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.edge_src[self.edge_dst == i]

    def isolated_points(self) -> np.ndarray:
        degree = np.bincount(self.edge_dst, minlength=self.n_points)
        return np.flatnonzero(degree == 0)


def _knn_rows(dist: np.ndarray, k_eff: int):
    """First k_eff columns of a stable per-row argsort: ascending distance,
    equal distances broken by smaller index."""
    order = np.argsort(dist, axis=1, kind="stable")
    idx = order[:, :k_eff]
    return idx, np.take_along_axis(dist, idx, axis=1)


def build_structure(cloud: PointCloud, k: int,
                    time_metric: bool = False) -> CausalNeighborhood:
    """kNN candidates then causal mask (t_j <= t_i, self excluded).

    time_metric swaps the coordinate metric for plain |t_i - t_j|; that is
    the fixed-graph ablation. Brute force over all pairs; n per sample is
    small enough that this is the reference and the implementation.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    n = cloud.n_points()
    if n == 0:
        raise ValidationError("cannot build a neighborhood over zero points")
    if time_metric:
        diff = cloud.t[:, None] - cloud.t[None, :]
        dist = np.abs(diff)
    else:
        coords = cloud.coords.data
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    k_eff = min(k, n - 1)
    if k_eff == 0:
        empty_i = np.zeros((n, 0), dtype=np.int64)
        empty_f = np.zeros((n, 0))
        e = np.zeros(0, dtype=np.int64)
        return CausalNeighborhood(n, k, empty_i, empty_f, e, e.copy(), np.zeros(0))
    cand_idx, cand_dist = _knn_rows(dist, k_eff)

    causal = cloud.t[cand_idx] <= cloud.t[:, None]
    dst_grid = np.broadcast_to(np.arange(n)[:, None], cand_idx.shape)
    edge_dst = dst_grid[causal].astype(np.int64)
    edge_src = cand_idx[causal].astype(np.int64)
    edge_dist = cand_dist[causal]
    return CausalNeighborhood(n, k, cand_idx, cand_dist, edge_dst, edge_src, edge_dist)


@dataclass
class EdgeWeights:
    scores: Tensor   # (E,) raw interaction scores
    alpha: Tensor    # (E,) softmax-normalized within each destination's edges


def compute_weights(cloud: PointCloud, nbhd: CausalNeighborhood, score_mlp,
                    use_displacement: bool = True) -> EdgeWeights:
    """Relation scores and normalized weights for the current layer's features.

    The relation vector is (p_i - p_j) ++ h_i ++ h_j; the ablated form drops
    the displacement. Weights are recomputed at every layer from that
    layer's features; the structure itself never changes within a pass.
    """
    h = cloud.features
    h_dst = gather_rows(h, nbhd.edge_dst)
    h_src = gather_rows(h, nbhd.edge_src)
    if use_displacement:
        dp = sub(gather_rows(cloud.coords, nbhd.edge_dst),
                 gather_rows(cloud.coords, nbhd.edge_src))
        rel = concat([dp, h_dst, h_src], axis=1)
    else:
        rel = concat([h_dst, h_src], axis=1)
    scores = flatten(score_mlp(rel))
    alpha = segment_softmax(scores, nbhd.edge_dst)
    return EdgeWeights(scores=scores, alpha=alpha)
