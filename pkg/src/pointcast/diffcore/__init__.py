"""Minimal reverse-mode autodiff engine used by the whole model."""

from pointcast.diffcore.tensor import (
    Tensor,
    as_tensor,
    default_dtype,
    grad_enabled,
    no_grad,
    set_default_dtype,
    using_dtype,
)
from pointcast.diffcore.ops import (
    add,
    add_rowvec,
    concat,
    flatten,
    gather_rows,
    layer_norm,
    matmul,
    mean_scalars,
    mse,
    mul,
    relu,
    reshape,
    scale,
    scale_rows,
    segment_softmax,
    segment_sum,
    softmax,
    sub,
)
from pointcast.diffcore.params import ModelParams, glorot_uniform
from pointcast.diffcore.optim import AdamW
from pointcast.diffcore.checkpoint import save_checkpoint, load_checkpoint, restore_into
from pointcast.diffcore.gradcheck import finite_diff_check

__all__ = [
    "Tensor",
    "no_grad",
    "grad_enabled",
    "as_tensor",
    "default_dtype",
    "set_default_dtype",
    "using_dtype",
    "add",
    "add_rowvec",
    "concat",
    "flatten",
    "gather_rows",
    "layer_norm",
    "matmul",
    "mean_scalars",
    "mse",
    "mul",
    "relu",
    "reshape",
    "scale",
    "scale_rows",
    "segment_softmax",
    "segment_sum",
    "softmax",
    "sub",
    "ModelParams",
    "glorot_uniform",
    "AdamW",
    "save_checkpoint",
    "load_checkpoint",
    "restore_into",
    "finite_diff_check",
]
