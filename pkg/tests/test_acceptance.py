"""Acceptance battery: ten end-to-end checks of the shipped system.

Each check prints one `[criterion NN] PASS/FAIL` line on the real stdout so
the battery reads as a checklist even under pytest's capture, then asserts.
Numbers frozen here (tolerances, dataset shapes, hyperparameters) are the
published contract for this package; loosening them is an API change.
"""

import inspect
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from _helpers import random_sample, set_deterministic_weights, tiny_model, weight_arrays
from _reference import reference_forward
from pointcast.baselines import LocfBaseline
from pointcast.cli import DEFAULT_SEEDS
from pointcast.data import (
    SynthSpec,
    load_dataset,
    make_sample,
    split_tvt,
    synth_generate,
)
from pointcast.diffcore import no_grad
from pointcast.harness import (
    build_variant,
    evaluate_baseline,
    gradcheck_tiny,
    run_seeds,
    run_single,
)
from pointcast.model import ModelConfig, PointModel
from pointcast.trainer import TrainConfig, evaluate, train

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def _report(capsys, num, ok, label, detail=""):
    status = "PASS" if ok else "FAIL"
    with capsys.disabled():
        print(f"\n[criterion {num:02d}] {status} {label}: {detail}", flush=True)
    return ok


def test_criterion_01_gradient_oracle(capsys):
    started = time.monotonic()
    report = gradcheck_tiny(h=1e-6, tol=1e-4, seed=7)
    elapsed = time.monotonic() - started

    def group_of(name):
        parts = name.split(".")
        if parts[0] == "propagation":
            tail = parts[2] if not parts[2].startswith("norm") else "norm"
            return f"{parts[1]}.{tail}"
        return parts[0]

    groups = {}
    for name, err in report["per_param"].items():
        g = group_of(name)
        groups[g] = max(groups.get(g, 0.0), err)
    expected = {"encoder", "predictor"}
    for l in range(2):
        expected |= {f"layer{l}.score_mlp", f"layer{l}.msg_mlp",
                     f"layer{l}.update_mlp", f"layer{l}.norm"}
    ok = (report["passed"]
          and set(groups) == expected
          and all(v < 1e-4 for v in groups.values())
          and elapsed < 60.0)
    detail = (f"max_rel_err {report['max_rel_err']:.2e} over "
              f"{report['n_checked']} elements in {len(groups)} groups, "
              f"{elapsed:.1f}s")
    assert _report(capsys, 1, ok, "gradient oracle", detail)


def test_criterion_02_forward_oracle(capsys):
    model = tiny_model(n_channels=3, seed=0)
    set_deterministic_weights(model, scale=0.05)
    t_h = [0.1, 0.25, 0.4]
    x_h = [0.4, -0.3, 0.2]
    c_h = [0, 1, 2]
    obs = list(zip(t_h, x_h, c_h))
    sample = make_sample("oracle", 0.5, obs, 3)
    t_q, c_q = [0.8], [1]
    with no_grad():
        engine = model.forward_queries(sample, t_q, c_q).data
    cfg = model.config
    ref = reference_forward(
        weight_arrays(model),
        {"n_channels": cfg.n_channels, "d_c": cfg.d_c, "d_t": cfg.d_t,
         "d_model": cfg.d_model, "k_neighbors": cfg.k_neighbors,
         "k_query": cfg.k_query, "n_layers": cfg.n_layers,
         "variant": cfg.variant},
        t_h, x_h, c_h, t_q, c_q)
    err = abs(float(engine[0]) - float(ref[0]))
    ok = err < 1e-10
    assert _report(capsys, 2, ok, "forward oracle",
                   f"3 points, 1 query, |engine - brute force| = {err:.2e}")


def test_criterion_03_causal_invariance(capsys):
    rng = np.random.default_rng(11)
    model = tiny_model(n_channels=3, seed=4)
    checked = 0
    ok = True
    for _ in range(100):
        sample = random_sample(rng, n_channels=3, n_obs=20)
        t_h, x_h, c_h = sample.history_arrays()
        horizon = float(np.quantile(t_h, 0.5))
        later = t_h > horizon
        if not later.any() or later.all():
            continue
        x_pert = x_h.copy()
        x_pert[later] += rng.normal(0.0, 10.0, size=int(later.sum()))
        base = model.final_features(sample)
        obs = [(float(t), float(x), int(c))
               for t, x, c in zip(t_h, x_pert, c_h)]
        obs += [(float(t), float(x), int(c))
                for t, x, c in zip(*sample.query_arrays())]
        perturbed_sample = make_sample(sample.series_id, sample.t_s, obs, 3)
        pert = model.final_features(perturbed_sample)
        early = ~later
        if not np.array_equal(base[early], pert[early]):
            ok = False
            break
        if np.array_equal(base[later], pert[later]):
            ok = False  # perturbation must actually reach later points
            break
        checked += early.sum()
    ok = ok and checked > 0
    assert _report(capsys, 3, ok, "causal invariance",
                   f"100 samples, {int(checked)} protected points bit-identical")


def test_criterion_04_permutation_invariance(capsys):
    rng = np.random.default_rng(13)
    model = tiny_model(n_channels=3, seed=5)
    trials = 0
    ok = True
    for _ in range(20):
        n = 18
        t = np.sort(rng.uniform(0.0, 1.0, size=n))
        t += np.arange(n) * 1e-9  # distinct times, distinct distances
        x = rng.normal(0.0, 1.0, size=n)
        c = rng.integers(0, 3, size=n)
        obs = [(float(a), float(b), int(d)) for a, b, d in zip(t, x, c)]
        t_s = float(np.quantile(t, 0.7))
        sample = make_sample("perm", t_s, obs, 3)
        if sample.queries.size == 0:
            continue
        base = model.predict_sample(sample)
        perm = rng.permutation(n)
        shuffled = make_sample("perm", t_s, [obs[i] for i in perm], 3)
        other = model.predict_sample(shuffled)
        if not np.array_equal(base, other):
            ok = False
            break
        trials += 1
    ok = ok and trials > 0
    assert _report(capsys, 4, ok, "permutation invariance",
                   f"{trials} shuffled samples, predictions bit-identical")


def test_criterion_05_weight_sanity(capsys):
    rng = np.random.default_rng(17)
    cfg = ModelConfig(n_channels=3, d_c=4, d_t=4, d_model=16, k_neighbors=8,
                      n_layers=2)
    model = PointModel(cfg, seed=6)
    n_sets = 0
    worst = 0.0
    ok = True
    for _ in range(10):
        sample = random_sample(rng, n_channels=3, n_obs=40)
        collect = []
        with no_grad():
            model.loss_on_sample(sample, collect=collect)
        _, nbhd = model.forward_cloud(sample)
        t_h, _, _ = sample.history_arrays()
        n = t_h.shape[0]
        if nbhd.cand_idx.shape != (n, min(cfg.k_neighbors, n - 1)):
            ok = False
            break
        if not np.all(t_h[nbhd.edge_src] <= t_h[nbhd.edge_dst]):
            ok = False
            break
        layers_seen = {entry["layer"] for entry in collect}
        if layers_seen != {0, 1, "query"}:
            ok = False
            break
        for entry in collect:
            sums = np.bincount(entry["edge_dst"], weights=entry["alpha"])
            present = np.bincount(entry["edge_dst"]) > 0
            gap = np.abs(sums[present] - 1.0).max() if present.any() else 0.0
            worst = max(worst, float(gap))
            n_sets += int(present.sum())
        if worst > 1e-6:
            ok = False
            break
    assert _report(capsys, 5, ok, "softmax weight sanity",
                   f"{n_sets} weight sets over 10 runs, worst |sum-1| = {worst:.1e}")


def test_criterion_06_overfit_floor(capsys):
    spec = SynthSpec(n_channels=2, n_samples=5, obs_range=(8, 14),
                     noise_sigma=0.0, cross_weight=0.3)
    _, samples = synth_generate(spec, seed=0)
    cfg = TrainConfig(seed=0, lr=1e-3, max_epochs=300, batch_size=1,
                      d_model=32, d_c=4, d_t=4, k_neighbors=6, n_layers=2)
    bundle = train(cfg, samples, [], [])
    losses = [e["train_loss"] for e in bundle.report.epochs]
    floor = min(losses)
    first = next((e["epoch"] for e in bundle.report.epochs
                  if e["train_loss"] < 0.01), None)
    ok = floor < 0.01 and len(losses) <= 300
    assert _report(capsys, 6, ok, "overfit floor",
                   f"5 samples, lr 1e-3: train loss {floor:.4f} "
                   f"(first < 0.01 at epoch {first})")


def test_criterion_07_directional_synthetic(capsys, tmp_path):
    started = time.monotonic()
    spec = SynthSpec(n_channels=4, n_samples=200, noise_sigma=0.05,
                     cross_weight=0.5)
    _, samples = synth_generate(spec, seed=2024)
    cfg = TrainConfig(seed=2024, d_model=32, d_c=8, d_t=8, k_neighbors=8,
                      n_layers=2, batch_size=4, lr=3e-3)
    seeds = DEFAULT_SEEDS
    _, agg_full = run_seeds(cfg, samples, 4, seeds, tmp_path / "full")
    _, agg_mp = run_seeds(build_variant("mean_pooling", cfg), samples, 4,
                          seeds, tmp_path / "mean_pooling")
    locf = evaluate_baseline("baseline_locf", samples, 4, cfg, seeds)
    meanb = evaluate_baseline("baseline_mean", samples, 4, cfg, seeds)
    elapsed = time.monotonic() - started

    full = agg_full["test_mse"]["mean"]
    mp = agg_mp["test_mse"]["mean"]
    lo = locf["test_mse"]["mean"]
    mb = meanb["test_mse"]["mean"]
    ok = (full < mp
          and full <= 0.8 * lo
          and full <= 0.8 * mb
          and elapsed < 1800.0)
    detail = (f"mse full {full:.3f} < mean_pooling {mp:.3f}; "
              f"vs locf {lo:.3f} (-{100 * (1 - full / lo):.0f}%), "
              f"vs channel-mean {mb:.3f} (-{100 * (1 - full / mb):.0f}%); "
              f"{elapsed:.0f}s")
    assert _report(capsys, 7, ok, "directional synthetic match", detail)


def test_criterion_08_protocol_echo(capsys):
    snapshot = TrainConfig().as_dict()
    expected = {
        "lr": 1e-3,
        "weight_decay": 1e-4,
        "batch_size": 32,
        "max_epochs": 300,
        "patience": 5,
        "min_improvement": 1e-6,
        "seed": 2024,
        "dtype": "float64",
        "split_ratios": [0.8, 0.1, 0.1],
        "d_c": 8,
        "d_t": 8,
        "d_model": 64,
        "k_neighbors": 8,
        "k_query": None,
        "n_layers": 2,
        "variant": "full",
    }
    uses_adamw = "AdamW(" in inspect.getsource(train)
    ok = (snapshot == expected
          and DEFAULT_SEEDS == (2024, 2025, 2026, 2027, 2028)
          and uses_adamw)
    assert _report(capsys, 8, ok, "protocol echo",
                   "epochs 300, patience 5, split 80/10/10, "
                   "seeds 2024-2028, AdamW")


def test_criterion_09_determinism(capsys, tmp_path):
    spec = SynthSpec(n_channels=3, n_samples=12, obs_range=(15, 25))
    _, samples = synth_generate(spec, seed=1)
    cfg = TrainConfig(seed=2024, max_epochs=4, d_model=8, d_c=2, d_t=2,
                      k_neighbors=3, batch_size=4)
    run_single(cfg, samples, 3, tmp_path / "a")
    run_single(cfg, samples, 3, tmp_path / "b")
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    metrics_a = json.dumps(ra["metrics"], sort_keys=True).encode()
    metrics_b = json.dumps(rb["metrics"], sort_keys=True).encode()
    epochs_equal = ra["epochs"] == rb["epochs"]
    ok = metrics_a == metrics_b and epochs_equal
    assert _report(capsys, 9, ok, "determinism",
                   f"two runs, metric fields byte-identical ({len(metrics_a)} bytes)")


def test_criterion_10_climate_stretch(capsys, tmp_path):
    ds = tmp_path / "climate.jsonl"
    proc = subprocess.run(
        [sys.executable, str(SCRIPTS / "make_ushcn_style.py"),
         "--out", str(ds), "--seed", "0"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    manifest, samples = load_dataset(ds)
    cfg = TrainConfig(seed=2024, d_model=32, d_c=8, d_t=8, k_neighbors=8,
                      n_layers=2, batch_size=4, lr=3e-3)
    tr, va, te = split_tvt(samples, cfg.split_ratios, cfg.seed)
    bundle = train(cfg, tr, va, te, n_channels=manifest.n_channels)
    te_n = [bundle.normalizer.apply(s) for s in te if s.queries.size]
    locf_mse, _ = evaluate(LocfBaseline(), te_n)
    model_mse = bundle.report.metrics["test_mse"]
    ok = (bundle.report.stop_reason in ("early_stop", "max_epochs")
          and model_mse < locf_mse)
    assert _report(capsys, 10, ok, "daily-climate stretch",
                   f"{len(samples)} windows: model mse {model_mse:.3f} "
                   f"vs locf {locf_mse:.3f}")
