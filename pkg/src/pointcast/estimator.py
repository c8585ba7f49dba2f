"""Estimator-style wrapper around the trainer.

fit(X) takes a list of SplitSample, carves a validation slice out of it for
early stopping, and trains the configured model. predict(X) returns one
array of raw-unit query predictions per sample. Hyperparameters mirror
TrainConfig so get_params/set_params round-trip cleanly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from pointcast.data import SplitSample
from pointcast.errors import ValidationError
from pointcast.trainer import TrainConfig, evaluate, train


def _check_samples(X):
    if not isinstance(X, (list, tuple)) or not X:
        raise ValidationError("X must be a non-empty list of SplitSample")
    for s in X:
        if not isinstance(s, SplitSample):
            raise ValidationError(f"X contains a non-sample entry: {type(s).__name__}")
    return list(X)


class PointGraphForecaster(BaseEstimator):
    def __init__(self, lr=1e-3, weight_decay=1e-4, batch_size=32, max_epochs=300,
                 patience=5, seed=2024, dtype="float64", d_c=8, d_t=8, d_model=64,
                 k_neighbors=8, k_query=None, n_layers=2, variant="full",
                 n_channels=None, val_fraction=0.1):
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.dtype = dtype
        self.d_c = d_c
        self.d_t = d_t
        self.d_model = d_model
        self.k_neighbors = k_neighbors
        self.k_query = k_query
        self.n_layers = n_layers
        self.variant = variant
        self.n_channels = n_channels
        self.val_fraction = val_fraction

    def _config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, weight_decay=self.weight_decay, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience, seed=self.seed,
            dtype=self.dtype, d_c=self.d_c, d_t=self.d_t, d_model=self.d_model,
            k_neighbors=self.k_neighbors, k_query=self.k_query,
            n_layers=self.n_layers, variant=self.variant,
        )

    def fit(self, X, y=None):
        samples = _check_samples(X)
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must lie in [0, 1)")
        n_val = int(np.floor(self.val_fraction * len(samples)))
        perm = np.random.default_rng(self.seed).permutation(len(samples))
        val = [samples[i] for i in perm[:n_val]]
        tr = [samples[i] for i in perm[n_val:]]
        n_channels = self.n_channels
        if n_channels is None:
            n_channels = 1 + max(int(s.c.max()) for s in samples)
        bundle = train(self._config(), tr, val, n_channels=n_channels)
        self.model_ = bundle.model
        self.normalizer_ = bundle.normalizer
        self.report_ = bundle.report
        self.n_channels_ = n_channels
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("estimator is not fitted; call fit(X) first")

    def predict(self, X):
        """Raw-unit predictions for each sample's own queries."""
        self._require_fitted()
        samples = _check_samples(X)
        out = []
        for s in samples:
            normalized = self.normalizer_.apply(s)
            t_q, _, c_q = normalized.query_arrays()
            y_norm = self.model_.predict_sample(normalized, t_q, c_q)
            out.append(self.normalizer_.denorm_value(y_norm, c_q))
        return out

    def score(self, X, y=None):
        """Negative pooled MSE over queries, normalized space."""
        self._require_fitted()
        samples = [self.normalizer_.apply(s) for s in _check_samples(X)]
        mse, _ = evaluate(self.model_, samples)
        return -mse
