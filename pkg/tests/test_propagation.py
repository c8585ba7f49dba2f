import numpy as np

from pointcast.diffcore import ModelParams, Tensor
from pointcast.encoder import PointCloud
from pointcast.graph import build_structure, compute_weights
from pointcast.propagation import (
    LN_EPS,
    PropagationLayer,
    aggregate,
    message,
    propagate,
    update,
)


def _layer(d_coord=2, d_model=3, seed=0, use_displacement=True):
    params = ModelParams()
    layer = PropagationLayer(params, "propagation.layer0", d_coord, d_model,
                             np.random.default_rng(seed),
                             use_displacement=use_displacement)
    return layer, params


def _cloud(rng, n=8, d_coord=2, d_model=3):
    coords = rng.normal(size=(n, d_coord))
    feats = rng.normal(size=(n, d_model))
    t = np.sort(rng.uniform(0, 1, size=n))
    c = rng.integers(0, 2, size=n)
    return PointCloud(coords=Tensor(coords), features=Tensor(feats), t=t, c=c)


def _np_mlp(params, prefix, x):
    w = {name: t.data for name, t in params.items()}
    h = np.maximum(x @ w[prefix + ".w1"] + w[prefix + ".b1"], 0.0)
    return h @ w[prefix + ".w2"] + w[prefix + ".b2"]


def _np_layer_norm(v, gain, bias):
    mu = v.mean()
    var = ((v - mu) ** 2).mean()
    return gain * (v - mu) / np.sqrt(var + LN_EPS) + bias


def test_aggregate_oracle():
    msgs = Tensor([[1.0, 0.0], [0.0, 1.0]])
    out = aggregate(msgs, Tensor([0.25, 0.75]))
    assert np.allclose(out.data, [0.25, 0.75], atol=1e-15)


def test_aggregate_empty_is_zero():
    out = aggregate(Tensor(np.zeros((0, 3))), Tensor(np.zeros(0)))
    assert np.array_equal(out.data, [0.0, 0.0, 0.0])


def test_message_oracle_vs_numpy(rng):
    layer, params = _layer()
    h_j = rng.normal(size=3)
    dp = rng.normal(size=2)
    out = message(Tensor(h_j), Tensor(dp), layer)
    expected = _np_mlp(params, "propagation.layer0.msg_mlp",
                       np.concatenate([h_j, dp]))
    assert np.allclose(out.data, expected, atol=1e-14)


def test_update_oracle_vs_numpy(rng):
    layer, params = _layer()
    h_i = rng.normal(size=3)
    m_i = rng.normal(size=3)
    out = update(Tensor(h_i), Tensor(m_i), layer)
    u = _np_mlp(params, "propagation.layer0.update_mlp", m_i)
    expected = _np_layer_norm(h_i + u, np.ones(3), np.zeros(3))
    assert np.allclose(out.data, expected, atol=1e-14)


def test_propagate_matches_pointwise_composition(rng):
    # The batched layer must equal the per-point message/aggregate/update ops.
    cloud = _cloud(rng)
    layer, params = _layer()
    nbhd = build_structure(cloud, k=3)
    out = propagate(cloud, nbhd, [layer])

    weights = compute_weights(cloud, nbhd, layer.score_mlp)
    for i in range(cloud.n_points()):
        mask = nbhd.edge_dst == i
        js = nbhd.edge_src[mask]
        if js.size:
            msgs = [message(Tensor(cloud.features.data[j]),
                            Tensor(cloud.coords.data[i] - cloud.coords.data[j]),
                            layer).data
                    for j in js]
            m_i = aggregate(Tensor(np.asarray(msgs)),
                            Tensor(weights.alpha.data[mask])).data
        else:
            m_i = np.zeros(3)
        h_i = update(Tensor(cloud.features.data[i]), Tensor(m_i), layer).data
        assert np.allclose(out.features.data[i], h_i, atol=1e-12), i


def test_zero_layers_identity(rng):
    cloud = _cloud(rng)
    nbhd = build_structure(cloud, k=3)
    out = propagate(cloud, nbhd, [])
    assert out is cloud


def test_layer_index_advances(rng):
    cloud = _cloud(rng)
    nbhd = build_structure(cloud, k=3)
    layer0, _ = _layer(seed=0)
    layer1, _ = _layer(seed=1)
    out = propagate(cloud, nbhd, [layer0, layer1])
    assert out.layer_index == 2
    assert np.array_equal(out.t, cloud.t)
    assert out.coords is cloud.coords  # coordinates never change


def test_isolated_point_gets_zero_message(rng):
    # An isolated point's update must equal LN(h + update_mlp(0)).
    coords = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]])
    t = np.array([0.0, 1.0, 2.0])  # earliest point has no causal neighbor
    feats = rng.normal(size=(3, 3))
    cloud = PointCloud(coords=Tensor(coords), features=Tensor(feats), t=t,
                       c=np.zeros(3, dtype=np.int64))
    layer, params = _layer()
    nbhd = build_structure(cloud, k=2)
    assert 0 in nbhd.isolated_points()
    out = propagate(cloud, nbhd, [layer])
    u0 = _np_mlp(params, "propagation.layer0.update_mlp", np.zeros(3))
    expected = _np_layer_norm(feats[0] + u0, np.ones(3), np.zeros(3))
    assert np.allclose(out.features.data[0], expected, atol=1e-13)


def test_single_point_cloud(rng):
    cloud = _cloud(rng, n=1)
    layer, _ = _layer()
    nbhd = build_structure(cloud, k=4)
    out = propagate(cloud, nbhd, [layer])
    assert out.features.data.shape == (1, 3)
    assert np.all(np.isfinite(out.features.data))


def test_learned_norm_gain_bias_applied(rng):
    cloud = _cloud(rng)
    layer, params = _layer()
    gain, bias = 2.0, 0.5
    dict(params.items())["propagation.layer0.norm_gain"].data[...] = gain
    dict(params.items())["propagation.layer0.norm_bias"].data[...] = bias
    nbhd = build_structure(cloud, k=3)
    out = propagate(cloud, nbhd, [layer])
    # Row statistics of (out - bias)/gain must be standardized.
    rows = (out.features.data - bias) / gain
    assert np.allclose(rows.mean(axis=1), 0.0, atol=1e-12)
    assert np.allclose(rows.var(axis=1), 1.0, atol=1e-4)  # eps skews slightly


def test_zero_update_mlp_reduces_to_plain_norm(rng):
    cloud = _cloud(rng)
    layer, params = _layer()
    for name, tensor in params.items():
        if "update_mlp" in name:
            tensor.data[...] = 0.0
    nbhd = build_structure(cloud, k=3)
    out = propagate(cloud, nbhd, [layer])
    expected = np.stack([_np_layer_norm(row, np.ones(3), np.zeros(3))
                         for row in cloud.features.data])
    assert np.allclose(out.features.data, expected, atol=1e-13)


def test_collect_hook_reports_normalized_weights(rng):
    cloud = _cloud(rng, n=10)
    nbhd = build_structure(cloud, k=3)
    layers = [_layer(seed=s)[0] for s in (0, 1)]
    collected = []
    propagate(cloud, nbhd, layers, collect=collected)
    assert [entry["layer"] for entry in collected] == [0, 1]
    for entry in collected:
        alpha, dst = entry["alpha"], entry["edge_dst"]
        for i in np.unique(dst):
            assert abs(alpha[dst == i].sum() - 1.0) < 1e-12
