"""Shared one-hidden-layer MLP block.

Every learned map in the model (time/value encoders, edge scoring, messages,
updates, query scoring, value transform, regression head) uses the same
shape: input -> hidden -> ReLU -> output. Weights are Glorot-uniform, biases
zero, all drawn from the caller's generator in registration order so builds
are reproducible.
"""

from __future__ import annotations

import numpy as np

from pointcast.diffcore import (
    ModelParams,
    Tensor,
    add_rowvec,
    glorot_uniform,
    matmul,
    relu,
)


class MLP:
    def __init__(self, params: ModelParams, prefix: str, d_in: int, d_hidden: int,
                 d_out: int, rng: np.random.Generator):
        self.w1 = params.add(f"{prefix}.w1", glorot_uniform(rng, d_in, d_hidden))
        self.b1 = params.add(f"{prefix}.b1", np.zeros(d_hidden))
        self.w2 = params.add(f"{prefix}.w2", glorot_uniform(rng, d_hidden, d_out))
        self.b2 = params.add(f"{prefix}.b2", np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        h = relu(add_rowvec(matmul(x, self.w1), self.b1))
        return add_rowvec(matmul(h, self.w2), self.b2)
