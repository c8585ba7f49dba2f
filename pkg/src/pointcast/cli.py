"""Command-line interface.

Subcommands: synth, train, eval, predict, gradcheck, ablate, sweep,
baselines. Settings resolve in three layers: built-in defaults, then a
--config JSON file, then explicit flags. Failures print a machine-readable
JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from pointcast import harness
from pointcast.baselines import BASELINES
from pointcast.data import (
    SynthSpec,
    load_dataset,
    save_dataset,
    split_tvt,
    synth_generate,
)
from pointcast.errors import PointcastError, ValidationError
from pointcast.trainer import TrainConfig, evaluate
from pointcast.diffcore import using_dtype

DEFAULT_SEEDS = (2024, 2025, 2026, 2027, 2028)


def parse_seeds(text: str):
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with config fields")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--out", help="output directory (or file for synth/predict)")
    common.add_argument("--f64", action="store_true",
                        help="force 64-bit numerics regardless of config")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return common


def _train_flags(p: argparse.ArgumentParser):
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--k", type=int, help="neighbor count for graph and queries")
    p.add_argument("--k-query", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--d-model", type=int)
    p.add_argument("--d-c", type=int)
    p.add_argument("--d-t", type=int)
    p.add_argument("--variant", choices=harness.MODEL_VARIANTS)
    p.add_argument("--dtype", choices=["float64", "float32"])


def _data_flags(p: argparse.ArgumentParser):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--data", help="dataset file (JSON lines)")
    group.add_argument("--synth", action="store_true",
                       help="generate the built-in synthetic dataset instead")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="pointcast",
                                     description="Forecast irregular multivariate "
                                                 "time series with point graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n-channels", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--obs-min", type=int)
    p.add_argument("--obs-max", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--cross-weight", type=float)
    p.add_argument("--time-span", type=float)

    p = sub.add_parser("train", parents=[common], help="train one model")
    _data_flags(p)
    _train_flags(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="test")

    p = sub.add_parser("predict", parents=[common],
                       help="write raw-unit predictions for each sample's queries")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check on a tiny model")
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("ablate", parents=[common], help="run the variant table")
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--seeds", help="e.g. 2024-2028 or 2024,2026")
    p.add_argument("--variants", help="comma list; default all variants + baselines")

    p = sub.add_parser("sweep", parents=[common], help="hyperparameter sweep")
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--param", choices=sorted(harness.SWEEP_PARAMS), required=True)
    p.add_argument("--values", help="comma list; default grid for the param")
    p.add_argument("--seeds")

    p = sub.add_parser("baselines", parents=[common],
                       help="evaluate the mean and LOCF baselines")
    _data_flags(p)
    p.add_argument("--seeds")

    return parser


def load_config_file(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return payload


FLAG_FIELDS = {
    "lr": "lr",
    "weight_decay": "weight_decay",
    "batch_size": "batch_size",
    "max_epochs": "max_epochs",
    "patience": "patience",
    "k": "k_neighbors",
    "k_query": "k_query",
    "layers": "n_layers",
    "d_model": "d_model",
    "d_c": "d_c",
    "d_t": "d_t",
    "variant": "variant",
    "dtype": "dtype",
}


def resolve_config(args, file_config: dict) -> TrainConfig:
    fields = {k: v for k, v in file_config.items()
              if k in TrainConfig.__dataclass_fields__}
    config = TrainConfig.from_dict(fields)
    overrides = {}
    for flag, field in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.f64:
        overrides["dtype"] = "float64"
    if overrides:
        config = replace(config, **overrides)
    config.validate()
    return config


def resolve_synth_spec(args, file_config: dict) -> SynthSpec:
    spec_fields = dict(file_config.get("synth", {}))
    mapping = {
        "n_channels": "n_channels",
        "n_samples": "n_samples",
        "noise": "noise_sigma",
        "cross_weight": "cross_weight",
        "time_span": "time_span",
    }
    for flag, field in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            spec_fields[field] = value
    obs_min = getattr(args, "obs_min", None)
    obs_max = getattr(args, "obs_max", None)
    if obs_min is not None or obs_max is not None:
        base = spec_fields.get("obs_range", SynthSpec.obs_range)
        spec_fields["obs_range"] = (obs_min or base[0], obs_max or base[1])
    if "obs_range" in spec_fields:
        spec_fields["obs_range"] = tuple(spec_fields["obs_range"])
    return SynthSpec(**spec_fields)


def resolve_dataset(args, file_config: dict, seed: int):
    if getattr(args, "data", None):
        return load_dataset(args.data)
    spec = resolve_synth_spec(args, file_config)
    return synth_generate(spec, seed=seed)


def resolve_seeds(args, file_config: dict):
    if getattr(args, "seeds", None):
        return parse_seeds(args.seeds)
    if "seeds" in file_config:
        return [int(s) for s in file_config["seeds"]]
    return list(DEFAULT_SEEDS)


def _cmd_synth(args, file_config):
    seed = args.seed if args.seed is not None else 0
    spec = resolve_synth_spec(args, file_config)
    manifest, samples = synth_generate(spec, seed=seed)
    out = Path(args.out or "dataset.jsonl")
    if out.is_dir():
        out = out / "dataset.jsonl"
    save_dataset(out, manifest, samples)
    print(json.dumps({"written": str(out), "n_samples": manifest.n_samples,
                      "n_channels": manifest.n_channels}))
    return 0


def _cmd_train(args, file_config):
    config = resolve_config(args, file_config)
    manifest, samples = resolve_dataset(args, file_config, config.seed)
    out = Path(args.out or "run")
    report = harness.run_single(config, samples, manifest.n_channels, out)
    print(json.dumps({"out": str(out), "metrics": report.metrics,
                      "best_epoch": report.best_epoch,
                      "stop_reason": report.stop_reason}))
    return 0


def _cmd_eval(args, file_config):
    model, normalizer, train_config = harness.model_from_checkpoint(args.checkpoint)
    if normalizer is None:
        raise ValidationError("checkpoint carries no normalizer; cannot evaluate")
    manifest, samples = load_dataset(args.data)
    if args.split == "all" or train_config is None:
        chosen = samples
        split_name = "all"
    else:
        tr, va, te = split_tvt(samples, train_config.split_ratios, train_config.seed)
        chosen = {"train": tr, "val": va, "test": te}[args.split]
        split_name = args.split
    dtype = "float64" if args.f64 or train_config is None else train_config.dtype
    with using_dtype(dtype):
        chosen_n = [normalizer.apply(s) for s in chosen if s.queries.size]
        mse, mae = evaluate(model, chosen_n)
    result = {"split": split_name, "n_samples": len(chosen_n), "mse": mse, "mae": mae}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(result, indent=1) + "\n")
    print(json.dumps(result))
    return 0


def _cmd_predict(args, file_config):
    model, normalizer, train_config = harness.model_from_checkpoint(args.checkpoint)
    if normalizer is None:
        raise ValidationError("checkpoint carries no normalizer; cannot predict")
    manifest, samples = load_dataset(args.data)
    out = Path(args.out or "predictions.jsonl")
    if out.is_dir():
        out = out / "predictions.jsonl"
    dtype = "float64" if args.f64 or train_config is None else train_config.dtype
    with using_dtype(dtype):
        harness.write_predictions(out, model, normalizer, samples)
    print(json.dumps({"written": str(out)}))
    return 0


def _cmd_gradcheck(args, file_config):
    seed = args.seed if args.seed is not None else 7
    report = harness.gradcheck_tiny(h=args.h, tol=args.tol, seed=seed)
    printable = {
        "passed": report["passed"],
        "max_rel_err": report["max_rel_err"],
        "n_checked": report["n_checked"],
        "failures": report["failures"],
    }
    print(json.dumps(printable))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.json").write_text(json.dumps(report, indent=1) + "\n")
    return 0 if report["passed"] else 1


def _cmd_ablate(args, file_config):
    config = resolve_config(args, file_config)
    seeds = resolve_seeds(args, file_config)
    manifest, samples = resolve_dataset(args, file_config, seeds[0])
    variants = harness.ALL_VARIANTS
    if args.variants:
        variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
        for v in variants:
            if v not in harness.ALL_VARIANTS:
                raise ValidationError(f"unknown variant {v!r}")
    out = Path(args.out or "ablation")
    rows = harness.ablate(config, samples, manifest.n_channels, seeds, out, variants)
    print(json.dumps({"out": str(out), "rows": rows}))
    return 0


def _cmd_sweep(args, file_config):
    config = resolve_config(args, file_config)
    seeds = resolve_seeds(args, file_config)
    manifest, samples = resolve_dataset(args, file_config, seeds[0])
    values = (parse_seeds(args.values) if args.values
              else harness.SWEEP_GRIDS[args.param])
    out = Path(args.out or "sweep")
    rows = harness.sweep(args.param, values, config, samples, manifest.n_channels,
                         seeds, out)
    print(json.dumps({"out": str(out), "cells": len(rows)}))
    return 0


def _cmd_baselines(args, file_config):
    config = resolve_config(args, file_config)
    seeds = resolve_seeds(args, file_config)
    manifest, samples = resolve_dataset(args, file_config, seeds[0])
    result = {}
    for tag in BASELINES:
        result[tag] = harness.evaluate_baseline(tag, samples, manifest.n_channels,
                                                config, seeds)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "baselines.json").write_text(json.dumps(result, indent=1) + "\n")
    print(json.dumps(result))
    return 0


COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "gradcheck": _cmd_gradcheck,
    "ablate": _cmd_ablate,
    "sweep": _cmd_sweep,
    "baselines": _cmd_baselines,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        file_config = load_config_file(args.config) if args.config else {}
        return COMMANDS[args.command](args, file_config)
    except PointcastError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except Exception as exc:  # contract: machine-readable failure output
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
