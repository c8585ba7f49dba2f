"""Differentiable operations.

Every op validates shapes up front, computes the forward result in float64,
and registers a closure that routes the output gradient to its parents.
Segment ops assume sorted segment ids; reductions run in ascending row order
so repeated runs are bit-identical.
"""

from __future__ import annotations

import numpy as np

from pointcast.diffcore.tensor import Tensor, make_op
from pointcast.errors import EmptyInputError, ShapeError


def _require_2d(x: Tensor, label: str):
    if x.data.ndim != 2:
        raise ShapeError(f"{label} must be 2-D, got shape {x.data.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_2d(a, "matmul lhs")
    _require_2d(b, "matmul rhs")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul inner dims differ: lhs {a.data.shape} vs rhs {b.data.shape}"
        )
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return make_op(out, (a, b), backward, name="matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes differ: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return make_op(out, (a, b), backward, name="add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub shapes differ: {a.data.shape} vs {b.data.shape}")
    out = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return make_op(out, (a, b), backward, name="sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shapes differ: {a.data.shape} vs {b.data.shape}")
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return make_op(out, (a, b), backward, name="mul")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out = x.data * c

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * c)

    return make_op(out, (x,), backward, name="scale")


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """x (n, d) plus a broadcast row vector v (d,)."""
    _require_2d(x, "add_rowvec lhs")
    if v.data.ndim != 1 or v.data.shape[0] != x.data.shape[1]:
        raise ShapeError(
            f"add_rowvec vector shape {v.data.shape} does not match rows of {x.data.shape}"
        )
    out = x.data + v.data[None, :]

    def backward(g):
        if x.requires_grad:
            x._accumulate(g)
        if v.requires_grad:
            v._accumulate(g.sum(axis=0))

    return make_op(out, (x, v), backward, name="add_rowvec")


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply row i of x (n, d) by scalar weight s[i]."""
    _require_2d(x, "scale_rows input")
    if s.data.ndim != 1 or s.data.shape[0] != x.data.shape[0]:
        raise ShapeError(
            f"scale_rows weights shape {s.data.shape} does not match rows of {x.data.shape}"
        )
    out = x.data * s.data[:, None]

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * s.data[:, None])
        if s.requires_grad:
            s._accumulate((g * x.data).sum(axis=1))

    return make_op(out, (x, s), backward, name="scale_rows")


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows x[idx]. Duplicate indices accumulate on backward."""
    _require_2d(x, "gather_rows input")
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows index must be 1-D, got shape {idx.shape}")
    out = x.data[idx]

    def backward(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            np.add.at(dx, idx, g)
            x._accumulate(dx)

    return make_op(out, (x,), backward, name="gather_rows")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    nd = tensors[0].data.ndim
    for t in tensors[1:]:
        if t.data.ndim != nd:
            raise ShapeError(
                f"concat rank mismatch: {tensors[0].data.shape} vs {t.data.shape}"
            )
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(piece)

    return make_op(out, tuple(tensors), backward, name="concat")


def reshape(x: Tensor, shape) -> Tensor:
    out = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return make_op(out, (x,), backward, name="reshape")


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (-1,))


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0.0))

    return make_op(out, (x,), backward, name="relu")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax: subtracts the max along axis before exp."""
    if x.data.size == 0:
        raise EmptyInputError("softmax over an empty score set")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            # Jacobian-vector product: p * (g - <g, p>)
            inner = (g * p).sum(axis=axis, keepdims=True)
            x._accumulate(p * (g - inner))

    return make_op(p, (x,), backward, name="softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit (biased) variance.

    Accepts a single vector (d,) or a batch of rows (n, d); gain and bias
    are always (d,).
    """
    if x.data.ndim not in (1, 2):
        raise ShapeError(f"layer_norm input must be 1-D or 2-D, got {x.data.shape}")
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got "
            f"{gain.data.shape} and {bias.data.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gain.data + bias.data
    batch_axes = tuple(range(x.data.ndim - 1))

    def backward(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=batch_axes))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=batch_axes))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv_std * (dxhat - m1 - xhat * m2))

    return make_op(out, (x, gain, bias), backward, name="layer_norm")


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all elements, returned as a scalar tensor."""
    if pred.data.shape != target.data.shape:
        raise ShapeError(
            f"mse shapes differ: pred {pred.data.shape} vs target {target.data.shape}"
        )
    if pred.data.size == 0:
        raise EmptyInputError("mse over an empty query set")
    diff = pred.data - target.data
    out = np.asarray((diff * diff).mean())
    n = pred.data.size

    def backward(g):
        coeff = 2.0 * float(g) / n
        if pred.requires_grad:
            pred._accumulate(coeff * diff)
        if target.requires_grad:
            target._accumulate(-coeff * diff)

    return make_op(out, (pred, target), backward, name="mse")


def mean_scalars(losses) -> Tensor:
    """Mean of scalar tensors as one tape node (batch loss aggregation)."""
    losses = list(losses)
    if not losses:
        raise ShapeError("mean_scalars needs at least one loss")
    for t in losses:
        if t.data.size != 1:
            raise ShapeError(f"mean_scalars expects scalars, got shape {t.data.shape}")
    n = len(losses)
    out = np.asarray(sum(float(t.data) for t in losses) / n)

    def backward(g):
        share = np.asarray(float(g) / n)
        for t in losses:
            if t.requires_grad:
                t._accumulate(share.reshape(t.data.shape))

    return make_op(out, tuple(losses), backward, name="mean_scalars")


def _segment_starts(segment_ids: np.ndarray):
    """Row indices where a new segment begins. Requires sorted ids."""
    if segment_ids.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(np.diff(segment_ids) < 0):
        raise ShapeError("segment ids must be sorted ascending")
    boundaries = np.flatnonzero(np.diff(segment_ids)) + 1
    return np.concatenate([[0], boundaries]).astype(np.int64)


def segment_softmax(scores: Tensor, segment_ids: np.ndarray) -> Tensor:
    """Softmax within contiguous runs of equal segment id.

    scores is flat (n,); segment_ids is sorted (n,). Each segment gets an
    independent max-subtracted softmax, so rows of one segment sum to one.
    """
    if scores.data.ndim != 1:
        raise ShapeError(f"segment_softmax scores must be 1-D, got {scores.data.shape}")
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != scores.data.shape:
        raise ShapeError(
            f"segment ids shape {segment_ids.shape} does not match scores {scores.data.shape}"
        )
    n = scores.data.shape[0]
    if n == 0:
        return make_op(np.zeros(0), (scores,), lambda g: None, name="segment_softmax")
    starts = _segment_starts(segment_ids)
    counts = np.diff(np.append(starts, n))
    seg_max = np.maximum.reduceat(scores.data, starts)
    row_max = np.repeat(seg_max, counts)
    e = np.exp(scores.data - row_max)
    seg_sum = np.add.reduceat(e, starts)
    row_sum = np.repeat(seg_sum, counts)
    p = e / row_sum

    def backward(g):
        if scores.requires_grad:
            seg_inner = np.add.reduceat(g * p, starts)
            row_inner = np.repeat(seg_inner, counts)
            scores._accumulate(p * (g - row_inner))

    return make_op(p, (scores,), backward, name="segment_softmax")


def segment_sum(x: Tensor, segment_ids: np.ndarray, n_segments: int) -> Tensor:
    """Sum rows of x (n, d) into (n_segments, d) buckets; empty buckets are zero."""
    _require_2d(x, "segment_sum input")
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.ndim != 1 or segment_ids.shape[0] != x.data.shape[0]:
        raise ShapeError(
            f"segment ids shape {segment_ids.shape} does not match rows of {x.data.shape}"
        )
    if segment_ids.size and (segment_ids.min() < 0 or segment_ids.max() >= n_segments):
        raise ShapeError("segment ids out of range")
    d = x.data.shape[1]
    out = np.zeros((n_segments, d), dtype=x.data.dtype)
    if segment_ids.size:
        starts = _segment_starts(segment_ids)
        sums = np.add.reduceat(x.data, starts, axis=0)
        out[segment_ids[starts]] = sums

    def backward(g):
        if x.requires_grad:
            x._accumulate(g[segment_ids])

    return make_op(out, (x,), backward, name="segment_sum")
