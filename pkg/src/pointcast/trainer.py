"""Training loop and evaluation protocol.

Mini-batch AdamW with early stopping on validation MSE: training stops after
`patience` epochs without a strict improvement (decrease of at least
min_improvement) and the parameters from the best epoch are restored.
Metrics are pooled over every query of every sample, in normalized space.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from pointcast.data import Normalizer, fit_normalizer
from pointcast.diffcore import AdamW, mean_scalars, using_dtype
from pointcast.errors import TrainingDiverged, ValidationError
from pointcast.model import ModelConfig, PointModel

log = logging.getLogger("pointcast.trainer")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 5
    min_improvement: float = 1e-6
    seed: int = 2024
    dtype: str = "float64"
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    d_c: int = 8
    d_t: int = 8
    d_model: int = 64
    k_neighbors: int = 8
    k_query: int | None = None
    n_layers: int = 2
    variant: str = "full"

    def validate(self):
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if self.dtype not in ("float64", "float32"):
            raise ValidationError(f"dtype must be float64 or float32, got {self.dtype!r}")

    def model_config(self, n_channels: int) -> ModelConfig:
        return ModelConfig(
            n_channels=n_channels,
            d_c=self.d_c,
            d_t=self.d_t,
            d_model=self.d_model,
            k_neighbors=self.k_neighbors,
            k_query=self.k_query,
            n_layers=self.n_layers,
            variant=self.variant,
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "split_ratios" in d:
            d["split_ratios"] = tuple(d["split_ratios"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    seed: int
    config: dict
    metrics: dict
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    stop_reason: str = ""
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "metrics": self.metrics,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class TrainBundle:
    model: PointModel
    normalizer: Normalizer
    report: TrainReport


def evaluate(model, samples) -> tuple[float, float]:
    """Pooled MSE/MAE over every query of every sample (normalized space).

    model is anything with predict_sample(sample) -> array over the sample's
    queries; baselines satisfy the same contract.
    """
    sq_sum = 0.0
    abs_sum = 0.0
    count = 0
    for s in samples:
        if s.queries.size == 0:
            continue
        _, y_true, _ = s.query_arrays()
        y_pred = model.predict_sample(s)
        err = y_pred - y_true
        sq_sum += float((err * err).sum())
        abs_sum += float(np.abs(err).sum())
        count += err.size
    if count == 0:
        raise ValidationError("evaluate: no queries in any sample")
    return sq_sum / count, abs_sum / count


def _usable(samples):
    kept = []
    skipped = 0
    for s in samples:
        if s.queries.size == 0:
            skipped += 1
            continue
        kept.append(s)
    if skipped:
        log.warning("skipping %d samples without queries", skipped)
    return kept


def train(config: TrainConfig, train_samples, val_samples, test_samples=(),
          n_channels: int | None = None,
          progress=None) -> TrainBundle:
    """Fit a model per the training protocol on pre-split raw samples.

    The normalizer is fit on the training split's history only and applied
    to all three splits. progress, when given, is called with one formatted
    line per epoch.
    """
    config.validate()
    if n_channels is None:
        n_channels = 1 + max(int(s.c.max()) for s in train_samples)
    with using_dtype(config.dtype):
        started = time.monotonic()
        normalizer = fit_normalizer(train_samples, n_channels)
        train_n = _usable([normalizer.apply(s) for s in train_samples])
        val_n = _usable([normalizer.apply(s) for s in val_samples])
        test_n = _usable([normalizer.apply(s) for s in test_samples])
        if not train_n:
            raise ValidationError("no trainable samples (all lack queries)")

        model = PointModel(config.model_config(n_channels), seed=config.seed)
        optimizer = AdamW(model.params.tensors(), lr=config.lr,
                          weight_decay=config.weight_decay)
        shuffle_rng = np.random.default_rng(config.seed)

        best_val = np.inf
        best_epoch = -1
        best_snapshot = model.params.snapshot()
        bad_epochs = 0
        stop_reason = "max_epochs"
        epochs_log = []

        for epoch in range(config.max_epochs):
            order = shuffle_rng.permutation(len(train_n))
            batch_losses = []
            for start in range(0, len(order), config.batch_size):
                batch = [train_n[i] for i in order[start:start + config.batch_size]]
                losses = [model.loss_on_sample(s) for s in batch]
                loss = mean_scalars(losses)
                loss_value = float(loss.data)
                if not np.isfinite(loss_value):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}",
                        diagnostics={
                            "epoch": epoch,
                            "batch_start": start,
                            "sample_ids": [s.series_id for s in batch],
                            "losses": [float(l.data) for l in losses],
                        },
                    )
                model.params.zero_grad()
                loss.backward()
                optimizer.step()
                batch_losses.append(loss_value)
            train_loss = float(np.mean(batch_losses))

            entry = {"epoch": epoch, "train_loss": train_loss}
            if val_n:
                val_mse, val_mae = evaluate(model, val_n)
                entry["val_mse"] = val_mse
                entry["val_mae"] = val_mae
            epochs_log.append(entry)
            line = (f"epoch {epoch:3d}  train_loss {train_loss:.6f}"
                    + (f"  val_mse {entry['val_mse']:.6f}  val_mae {entry['val_mae']:.6f}"
                       if val_n else ""))
            log.info(line)
            if progress is not None:
                progress(line)

            if val_n:
                # Any strict decrease moves the best checkpoint, but only a
                # decrease of min_improvement counts against the patience
                # clock; float-noise wiggles do not extend training.
                delta = best_val - entry["val_mse"]
                if delta > 0:
                    best_val = entry["val_mse"]
                    best_epoch = epoch
                    best_snapshot = model.params.snapshot()
                if delta >= config.min_improvement:
                    bad_epochs = 0
                else:
                    bad_epochs += 1
                    if bad_epochs >= config.patience:
                        stop_reason = "early_stop"
                        break
            else:
                best_epoch = epoch

        if val_n:
            model.params.restore(best_snapshot)
        metrics = {"train_loss_final": epochs_log[-1]["train_loss"]}
        if val_n:
            best_entry = next(e for e in epochs_log if e["epoch"] == best_epoch)
            metrics["val_mse"] = best_val
            metrics["val_mae"] = best_entry["val_mae"]
        if test_n:
            test_mse, test_mae = evaluate(model, test_n)
            metrics["test_mse"] = test_mse
            metrics["test_mae"] = test_mae

        report = TrainReport(
            seed=config.seed,
            config=config.as_dict(),
            metrics=metrics,
            epochs=epochs_log,
            best_epoch=best_epoch,
            stop_reason=stop_reason,
            wall_time_s=time.monotonic() - started,
        )
        return TrainBundle(model=model, normalizer=normalizer, report=report)


def aggregate_seeds(reports) -> dict:
    """Mean and sample std (n-1) of every shared numeric metric."""
    reports = list(reports)
    if not reports:
        raise ValidationError("aggregate_seeds needs at least one report")
    if len(reports) == 1:
        log.warning("single report; std reported as 0")
    keys = set(reports[0].metrics)
    for r in reports[1:]:
        keys &= set(r.metrics)
    out = {}
    for key in sorted(keys):
        values = np.asarray([float(r.metrics[key]) for r in reports])
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        out[key] = {"mean": float(values.mean()), "std": std}
    return out
