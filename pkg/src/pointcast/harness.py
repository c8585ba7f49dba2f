"""Experiment orchestration: single runs, seed protocols, ablations, sweeps.

Every variant and every sweep cell goes through the one train() path, so
metric differences between rows are attributable to the configuration alone.
Each run writes report.json, metrics.csv, predictions.jsonl, a checkpoint,
a progress log, and a loss-curve CSV into its own directory.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from pointcast.baselines import BASELINES
from pointcast.data import (
    Normalizer,
    SynthSpec,
    fit_normalizer,
    load_dataset,
    split_tvt,
    synth_generate,
)
from pointcast.diffcore import finite_diff_check, load_checkpoint, restore_into, save_checkpoint, using_dtype
from pointcast.errors import PointcastError, ValidationError
from pointcast.model import VARIANTS, ModelConfig, PointModel
from pointcast.trainer import TrainConfig, TrainReport, aggregate_seeds, evaluate, train

log = logging.getLogger("pointcast.harness")

MODEL_VARIANTS = VARIANTS
ALL_VARIANTS = MODEL_VARIANTS + tuple(BASELINES)

SWEEP_PARAMS = {
    "K": "k_neighbors",
    "L": "n_layers",
    "d_model": "d_model",
    "d_c": "d_c",
}

SWEEP_GRIDS = {
    "K": [2, 4, 8, 16, 32],
    "L": [1, 2, 3, 4],
    "d_model": [16, 32, 64, 128],
    "d_c": [2, 4, 8, 16],
}


def build_variant(tag: str, config: TrainConfig) -> TrainConfig:
    """Config for one ablation row; model construction reads the tag."""
    if tag not in MODEL_VARIANTS:
        raise ValidationError(f"unknown variant {tag!r}; expected one of {MODEL_VARIANTS}")
    return replace(config, variant=tag)


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=1) + "\n")


def _write_metrics_csv(path: Path, metrics: dict):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(metrics):
            writer.writerow([key, repr(float(metrics[key]))])


def _write_loss_curve(path: Path, epochs: list):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_mse", "val_mae"])
        for e in epochs:
            writer.writerow([e["epoch"], repr(e["train_loss"]),
                             repr(e["val_mse"]) if "val_mse" in e else "",
                             repr(e["val_mae"]) if "val_mae" in e else ""])


def write_predictions(path: Path, model, normalizer: Normalizer, samples):
    """Raw-unit predictions for each sample's own queries, one JSON per line."""
    with Path(path).open("w") as fh:
        for s in samples:
            if s.queries.size == 0:
                continue
            normalized = normalizer.apply(s)
            t_q, y_true, c_q = s.query_arrays()
            tn_q, _, _ = normalized.query_arrays()
            y_norm = model.predict_sample(normalized, tn_q, c_q)
            y_pred = normalizer.denorm_value(y_norm, c_q)
            for t, c, yp, yt in zip(t_q, c_q, y_pred, y_true):
                fh.write(json.dumps({
                    "series_id": s.series_id,
                    "t": float(t),
                    "c": int(c),
                    "y_pred": float(yp),
                    "y_true": float(yt),
                }) + "\n")


def save_run_checkpoint(path, model: PointModel, config: TrainConfig,
                        normalizer: Normalizer):
    save_checkpoint(
        path,
        model.params,
        config={"train": config.as_dict(), "model": model.config.as_dict()},
        normalizer=normalizer.as_dict(),
        seed=model.seed,
    )


def model_from_checkpoint(path):
    """Rebuild (model, normalizer, train_config) from a checkpoint file."""
    payload = load_checkpoint(path)
    cfg = payload.get("config") or {}
    if "model" not in cfg:
        raise ValidationError(f"{path}: checkpoint lacks a model config")
    model_config = ModelConfig.from_dict(cfg["model"])
    train_config = TrainConfig.from_dict(cfg["train"]) if "train" in cfg else None
    seed = payload.get("seed") or 0
    model = PointModel(model_config, seed=int(seed))
    restore_into(model.params, payload["params"])
    normalizer = Normalizer.from_dict(payload["normalizer"]) if payload.get("normalizer") else None
    return model, normalizer, train_config


def run_single(config: TrainConfig, samples, n_channels: int, out_dir,
               raw_test=None) -> TrainReport:
    """Split, train, evaluate, and write one run's artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tr, va, te = split_tvt(samples, config.split_ratios, config.seed)
    progress_path = out / "progress.log"
    with progress_path.open("w") as progress_fh:
        bundle = train(config, tr, va, te, n_channels=n_channels,
                       progress=lambda line: print(line, file=progress_fh))
    report = bundle.report
    _write_json(out / "report.json", report.as_dict())
    _write_metrics_csv(out / "metrics.csv", report.metrics)
    _write_loss_curve(out / "loss_curve.csv", report.epochs)
    save_run_checkpoint(out / "checkpoint.json", bundle.model, config,
                        bundle.normalizer)
    with using_dtype(config.dtype):
        write_predictions(out / "predictions.jsonl", bundle.model,
                          bundle.normalizer, te if raw_test is None else raw_test)
    return report


def run_seeds(config: TrainConfig, samples, n_channels: int, seeds, out_dir):
    """One run per seed (split and init both keyed by the seed), plus an
    aggregate of the shared metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for seed in seeds:
        cfg = replace(config, seed=int(seed))
        reports.append(run_single(cfg, samples, n_channels, out / f"seed-{seed}"))
    agg = aggregate_seeds(reports)
    _write_json(out / "aggregate.json", {
        "seeds": [int(s) for s in seeds],
        "metrics": agg,
    })
    return reports, agg


def evaluate_baseline(tag: str, samples, n_channels: int, config: TrainConfig,
                      seeds) -> dict:
    """Baselines follow the same per-seed split/normalization protocol."""
    if tag not in BASELINES:
        raise ValidationError(f"unknown baseline {tag!r}")
    baseline = BASELINES[tag]()
    mses, maes = [], []
    for seed in seeds:
        tr, _, te = split_tvt(samples, config.split_ratios, int(seed))
        normalizer = fit_normalizer(tr, n_channels)
        te_n = [normalizer.apply(s) for s in te if s.queries.size]
        mse, mae = evaluate(baseline, te_n)
        mses.append(mse)
        maes.append(mae)
    def stat(vals):
        arr = np.asarray(vals)
        return {"mean": float(arr.mean()),
                "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}
    return {"test_mse": stat(mses), "test_mae": stat(maes)}


def ablate(config: TrainConfig, samples, n_channels: int, seeds, out_dir,
           variants=ALL_VARIANTS) -> list:
    """Train every requested variant over the seed list; baselines are
    evaluated on the same splits without training."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for tag in variants:
        started = time.monotonic()
        if tag in BASELINES:
            agg = evaluate_baseline(tag, samples, n_channels, config, seeds)
        else:
            _, agg = run_seeds(build_variant(tag, config), samples, n_channels,
                               seeds, out / tag)
        rows.append({
            "variant": tag,
            "mse_mean": agg["test_mse"]["mean"],
            "mse_std": agg["test_mse"]["std"],
            "mae_mean": agg["test_mae"]["mean"],
            "mae_std": agg["test_mae"]["std"],
            "runtime_s": time.monotonic() - started,
        })
        log.info("variant %-18s mse %.6f ± %.6f", tag, rows[-1]["mse_mean"],
                 rows[-1]["mse_std"])
    with (out / "ablation.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["variant", "mse_mean", "mse_std",
                                                "mae_mean", "mae_std", "runtime_s"])
        writer.writeheader()
        writer.writerows(rows)
    _write_json(out / "ablation.json", {"rows": rows})
    return rows


def sweep(param: str, values, config: TrainConfig, samples, n_channels: int,
          seeds, out_dir) -> list:
    """Metric-vs-value grid for one hyperparameter. A failed cell is recorded
    and the sweep moves on."""
    if param not in SWEEP_PARAMS:
        raise ValidationError(f"sweep param must be one of {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    field = SWEEP_PARAMS[param]
    rows = []
    for value in values:
        for seed in seeds:
            cfg = replace(config, seed=int(seed), **{field: int(value)})
            cell_dir = out / f"{param}-{value}" / f"seed-{seed}"
            try:
                report = run_single(cfg, samples, n_channels, cell_dir)
                rows.append({
                    "param": param, "value": int(value), "seed": int(seed),
                    "mse": report.metrics.get("test_mse"),
                    "mae": report.metrics.get("test_mae"),
                    "error": "",
                })
            except PointcastError as exc:
                log.warning("sweep cell %s=%s seed=%s failed: %s", param, value,
                            seed, exc)
                rows.append({
                    "param": param, "value": int(value), "seed": int(seed),
                    "mse": "", "mae": "", "error": str(exc),
                })
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "seed", "mse", "mae"])
        for row in rows:
            writer.writerow([row["param"], row["value"], row["seed"],
                             "" if row["mse"] in ("", None) else repr(row["mse"]),
                             "" if row["mae"] in ("", None) else repr(row["mae"])])
    _write_json(out / "sweep.json", {"rows": rows})
    return rows


def gradcheck_tiny(h: float = 1e-6, tol: float = 1e-4, seed: int = 7) -> dict:
    """Finite-difference check of the full gradient path on a tiny model:
    3 channels, 4+4 coordinate dims, width 8, K=3, two layers, 10 history
    points, 3 queries.

    The checked function is the sample loss times 2**-10. The scaling is
    exact in binary floating point, so relative comparisons for ordinary
    gradients are unchanged; it exists to push central-difference rounding
    noise on near-zero gradient elements below the comparison floor, where
    no finite-difference scheme carries signal at 64-bit anyway.
    """
    from pointcast.data import make_sample
    from pointcast.diffcore import scale

    rng = np.random.default_rng(seed)
    t_hist = np.sort(rng.uniform(0.0, 0.66, size=10))
    t_query = np.sort(rng.uniform(0.70, 1.0, size=3))
    ts = np.concatenate([t_hist, t_query])
    cs = rng.integers(0, 3, size=13)
    xs = rng.normal(0.0, 1.0, size=13)
    obs = [(float(t), float(x), int(c)) for t, x, c in zip(ts, xs, cs)]
    sample = make_sample("gradcheck", 0.66, obs, n_channels=3)

    config = ModelConfig(n_channels=3, d_c=4, d_t=4, d_model=8, k_neighbors=3,
                         n_layers=2, variant="full")
    model = PointModel(config, seed=seed)
    report = finite_diff_check(lambda: scale(model.loss_on_sample(sample), 2.0 ** -10),
                               model.params.items(), h=h, tol=tol)
    report["tol"] = tol
    report["h"] = h
    report["passed"] = not report["failures"]
    return report
