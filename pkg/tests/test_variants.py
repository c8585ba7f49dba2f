import numpy as np
import pytest

from _helpers import random_sample, tiny_model
from pointcast.errors import ValidationError
from pointcast.graph import build_structure
from pointcast.harness import MODEL_VARIANTS, build_variant
from pointcast.model import VARIANTS
from pointcast.trainer import TrainConfig


def _param_names(model):
    return [name for name, _ in model.params.items()]


def test_variant_registries_agree():
    assert set(MODEL_VARIANTS) == set(VARIANTS)
    assert "full" in VARIANTS


def test_build_variant():
    cfg = TrainConfig(d_model=16)
    out = build_variant("mean_pooling", cfg)
    assert out.variant == "mean_pooling"
    assert out.d_model == 16
    assert cfg.variant == "full"  # original untouched
    with pytest.raises(ValidationError):
        build_variant("no_such_variant", cfg)


def test_no_relation_aware_drops_displacement_inputs():
    full = tiny_model(variant="full")
    bare = tiny_model(variant="no_relation_aware")
    d_model = full.config.d_model
    d_coord = full.config.d_c + full.config.d_t

    w_full = dict(full.params.items())
    w_bare = dict(bare.params.items())
    score = "propagation.layer0.score_mlp.w1"
    msg = "propagation.layer0.msg_mlp.w1"
    assert w_full[score].data.shape[0] == d_coord + 2 * d_model
    assert w_bare[score].data.shape[0] == 2 * d_model
    assert w_full[msg].data.shape[0] == d_model + d_coord
    assert w_bare[msg].data.shape[0] == d_model
    # Query scoring keeps the query displacement in every variant that has it.
    q = "predictor.query_score_mlp.w1"
    assert w_full[q].data.shape[0] == d_coord + d_model
    assert w_bare[q].data.shape[0] == d_coord + d_model


def test_no_learned_coords_has_no_coordinate_params():
    model = tiny_model(variant="no_learned_coords")
    names = _param_names(model)
    assert not any("channel_embedding" in n for n in names)
    assert not any("time_mlp" in n for n in names)
    assert any(n.startswith("encoder.value_mlp") for n in names)


def test_mean_pooling_has_no_query_score_params():
    model = tiny_model(variant="mean_pooling")
    names = _param_names(model)
    assert not any("query_score_mlp" in n for n in names)
    full_names = _param_names(tiny_model(variant="full"))
    assert any("query_score_mlp" in n for n in full_names)


def test_no_adaptive_graph_uses_time_metric(rng):
    model = tiny_model(variant="no_adaptive_graph", k_neighbors=3)
    assert model.time_metric_graph
    assert not tiny_model(variant="full").time_metric_graph
    sample = random_sample(rng, n_obs=15)
    _, nbhd = model.forward_cloud(sample)
    t_h, _, _ = sample.history_arrays()
    # Candidate sets come from |dt| alone: nearest-in-time indices.
    n = t_h.shape[0]
    for i in range(n):
        dt = np.abs(t_h - t_h[i])
        dt[i] = np.inf
        want = np.argsort(dt, kind="stable")[:3]
        assert np.array_equal(nbhd.cand_idx[i], want)
    # The full model ranks the same points by learned-coordinate distance.
    cloud0 = model.encoder.encode_history(sample)
    coord_nbhd = build_structure(cloud0, k=3, time_metric=False)
    assert not np.array_equal(nbhd.cand_idx, coord_nbhd.cand_idx)


def test_variants_all_train_one_step(rng):
    sample = random_sample(rng, n_obs=18)
    for variant in VARIANTS:
        model = tiny_model(variant=variant, seed=3)
        loss = model.loss_on_sample(sample)
        model.params.zero_grad()
        loss.backward()
        grads = [t.grad for _, t in model.params.items()]
        assert all(g is not None for g in grads), variant
        assert all(np.all(np.isfinite(g)) for g in grads), variant


def test_variant_predictions_differ(rng):
    sample = random_sample(rng, n_obs=18)
    preds = {}
    for variant in VARIANTS:
        model = tiny_model(variant=variant, seed=3)
        preds[variant] = model.predict_sample(sample)
    base = preds["full"]
    for variant in VARIANTS:
        if variant == "full":
            continue
        assert not np.allclose(base, preds[variant]), variant
