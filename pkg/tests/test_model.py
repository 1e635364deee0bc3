import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from funcgnn import autodiff as ad
from funcgnn.autodiff import ShapeError, Tape, Tensor
from funcgnn.corpus import builtin_programs, cfg_from_source
from funcgnn.graph_core import LabeledCfg, build_vocabulary
from funcgnn.model import (
    CheckpointError,
    GraphTable,
    ModelConfig,
    ModelParams,
    encode_graph,
    forward,
    forward_pairs,
    init_params,
    load_checkpoint,
    mean_aggregation_matrix,
    node_similarity_histogram,
    ntn_compare,
    pair_histograms,
    predict_pairs,
    sage_layer,
    save_checkpoint,
)
from oracles import finite_difference, gradient_errors
from strategies import graphs


def small_config(vocab_size, **kw):
    base = dict(sage_dims=(5, 4, 3), ntn_slices=2, histogram_bins=4, fc_dims=(3, 1))
    base.update(kw)
    return ModelConfig(vocab_size, **base)


def spread(params, seed, scale=0.6):
    """Replace every parameter by N(0, scale) so relu units are active and embeddings non-trivial."""
    rng = np.random.default_rng(seed)
    for t in params.tensors.values():
        t.data[:] = rng.normal(0, scale, t.shape)
    return params


@pytest.fixture(scope="module")
def cfgs():
    return [cfg_from_source(p.source, p.name) for p in builtin_programs()]


# --- config and params -----------------------------------------------------------------------


def test_config_defaults_and_validation():
    c = ModelConfig(10)
    assert c.sage_dims == (64, 64, 32) and c.ntn_slices == 16 and c.histogram_bins == 16 and c.fc_dims == (32, 16, 8, 1)
    with pytest.raises(ValueError):
        ModelConfig(10, sage_dims=(8, 8))
    assert ModelConfig(10, sage_dims=(8, 8), allow_any_depth=True).sage_dims == (8, 8)
    with pytest.raises(ValueError):
        ModelConfig(10, fc_dims=(4, 2))
    with pytest.raises(ValueError):
        ModelConfig(10, ntn_slices=0)


def test_param_shapes():
    p = init_params(ModelConfig(7))
    assert p["sage_0"].shape == (7, 64) and p["sage_2"].shape == (64, 32)
    assert p["attention"].shape == (32, 32)
    assert p["ntn_w"].shape == (32, 32 * 16) and p["ntn_v"].shape == (16, 64) and p["ntn_b"].shape == (1, 16)
    assert p["fc_w0"].shape == (32, 32) and p["fc_w3"].shape == (8, 1)
    assert all(np.isfinite(t.data).all() for t in p.tensors.values())


def test_init_seeded():
    a, b = init_params(ModelConfig(5, seed=3)), init_params(ModelConfig(5, seed=3))
    assert all(np.array_equal(a[k].data, b[k].data) for k in a.tensors)


# --- GraphSAGE layer ---------------------------------------------------------------------------


def test_mean_matrix_uses_both_directions():
    m = mean_aggregation_matrix(LabeledCfg(("a", "b", "c"), ((0, 1), (1, 2)))).toarray()
    assert np.allclose(m, [[1 / 2, 1 / 2, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 2, 1 / 2]])


def test_sage_isolated_node():
    rng = np.random.default_rng(0)
    h, w = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    out = sage_layer(Tensor(h), LabeledCfg(("a", "b")), Tensor(w)).data
    assert np.allclose(out, np.maximum(h @ w, 0))


def test_sage_shared_embedding(cfgs):
    rng = np.random.default_rng(1)
    x, w = rng.normal(size=(1, 4)), rng.normal(size=(4, 3))
    for g in cfgs[:5]:
        out = sage_layer(Tensor(np.repeat(x, len(g), 0)), g, Tensor(w)).data
        assert np.allclose(out, np.maximum(x @ w, 0))


def test_sage_hand_computed_two_nodes():
    h = np.array([[1.0, 2.0], [3.0, -1.0]])
    w = np.array([[1.0, -1.0], [0.5, 2.0]])
    # both nodes average {h0, h1} = (2, 0.5); times W = (2.25, -1); relu = (2.25, 0)
    out = sage_layer(Tensor(h), LabeledCfg(("a", "b"), ((0, 1),)), Tensor(w)).data
    assert np.allclose(out, [[2.25, 0.0], [2.25, 0.0]])


def test_sage_shape_mismatch():
    with pytest.raises(ShapeError):
        sage_layer(Tensor(np.ones((3, 2))), LabeledCfg(("a", "b")), Tensor(np.ones((2, 2))))


# --- pooling and encoding ------------------------------------------------------------------------


def test_encoding_closed_form_when_embeddings_equal():
    # a single-label graph with identical neighborhoods (a directed cycle) gives equal rows of U
    g = LabeledCfg(("x",) * 4, ((0, 1), (1, 2), (2, 3), (3, 0)))
    vocab = build_vocabulary([g])
    cfg = small_config(vocab.size)
    params = spread(init_params(cfg), 2)
    enc = encode_graph(g, vocab, params, cfg)
    u = enc.node_matrix[0]
    assert np.allclose(enc.node_matrix, u)
    c = np.maximum(u @ params["attention"].data, 0)
    assert np.allclose(enc.context, c)
    assert np.allclose(enc.embedding, 4 * max(u @ c, 0) * u)


def test_single_node_hand_derived():
    g = LabeledCfg(("x",))
    vocab = build_vocabulary([g])
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), 3)
    h = p["sage_0"].data[[0]]
    for t in range(3):
        h = np.maximum(h if t == 0 else h @ p[f"sage_{t}"].data, 0)
    c = np.maximum(h @ p["attention"].data, 0)
    a = max(float((h @ c.T)[0, 0]), 0)
    enc = encode_graph(g, vocab, p, cfg)
    assert np.allclose(enc.embedding, a * h[0])
    assert enc.attention.tolist() == pytest.approx([a])


@settings(max_examples=30, deadline=None)
@given(graphs(max_nodes=6), st.data())
def test_attention_nonnegative_and_h_is_weighted_sum(g, data):
    vocab = build_vocabulary([g])
    cfg = small_config(vocab.size, seed=data.draw(st.integers(0, 100)))
    enc = encode_graph(g, vocab, spread(init_params(cfg), 4), cfg)
    assert (enc.attention >= 0).all()
    assert np.allclose(enc.embedding, enc.attention @ enc.node_matrix)


# --- NTN ---------------------------------------------------------------------------------------


def test_ntn_zero_params():
    cfg = small_config(3)
    p = init_params(cfg)
    for t in p.tensors.values():
        t.data[:] = 0
    assert ntn_compare(np.ones(3), np.ones(3), p).tolist() == [0.0, 0.0]


def test_ntn_identity_slice():
    cfg = small_config(3, ntn_slices=1)
    p = init_params(cfg)
    p["ntn_w"].data[:] = np.eye(3)
    p["ntn_v"].data[:] = 0
    p["ntn_b"].data[:] = 0
    hi, hj = np.array([1.0, 2.0, -1.0]), np.array([0.5, 1.0, 1.0])
    assert ntn_compare(hi, hj, p).tolist() == [max(hi @ hj, 0)]
    assert ntn_compare(hi, -hj, p).tolist() == [0.0]


def test_ntn_slices_are_independent_bilinear_forms():
    cfg = small_config(3, ntn_slices=3)
    p = spread(init_params(cfg), 5)
    hi, hj = np.random.default_rng(6).normal(size=(2, 3))
    f = 3
    w, v, b = p["ntn_w"].data, p["ntn_v"].data, p["ntn_b"].data[0]
    expected = [max(hi @ w[:, s * f:(s + 1) * f] @ hj + v[s] @ np.r_[hi, hj] + b[s], 0) for s in range(3)]
    assert np.allclose(ntn_compare(hi, hj, p), expected)


# --- histogram --------------------------------------------------------------------------------


def test_histogram_large_products_land_in_last_bin():
    u = np.full((3, 2), 10.0)
    assert node_similarity_histogram(u, u, 4).tolist() == [0, 0, 0, 1]


def test_histogram_padding_counts_half():
    u_i = np.full((2, 2), 10.0)
    u_j = np.full((1, 2), 10.0)
    # 2x2 similarity matrix: 2 real entries near 1, 2 padded entries at exactly 0.5
    assert node_similarity_histogram(u_i, u_j, 4).tolist() == [0, 0, 0.5, 0.5]


def test_histogram_single_bin():
    assert node_similarity_histogram(np.ones((2, 1)), np.ones((3, 1)), 1).tolist() == [1.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.integers(0, 1000))
def test_histogram_normalized_and_order_invariant(n1, n2, bins, seed):
    rng = np.random.default_rng(seed)
    u_i, u_j = rng.normal(size=(n1, 3)), rng.normal(size=(n2, 3))
    h = node_similarity_histogram(u_i, u_j, bins)
    assert len(h) == bins and abs(h.sum() - 1) < 1e-12 and (h >= 0).all()
    h2 = node_similarity_histogram(u_i[rng.permutation(n1)], u_j[rng.permutation(n2)], bins)
    assert np.allclose(h, h2, atol=1e-15)


def test_batched_histograms_match_per_pair(cfgs):
    vocab = build_vocabulary(cfgs)
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), 7)
    table = GraphTable(cfgs[:6], vocab)
    pairs = np.array([(i, j) for i in range(6) for j in range(6)])
    batched = pair_histograms(table, pairs, p, cfg)
    for k, (i, j) in enumerate(pairs):
        ui = encode_graph(cfgs[i], vocab, p, cfg).node_matrix
        uj = encode_graph(cfgs[j], vocab, p, cfg).node_matrix
        assert np.allclose(batched[k], node_similarity_histogram(ui, uj, cfg.histogram_bins), atol=1e-12)


# --- forward -----------------------------------------------------------------------------------


def test_forward_range_and_determinism(cfgs):
    vocab = build_vocabulary(cfgs)
    cfg = ModelConfig(vocab.size)
    p = init_params(cfg)
    y = forward(cfgs[0], cfgs[1], vocab, p, cfg)
    assert 0 < y < 1
    assert forward(cfgs[0], cfgs[1], vocab, p, cfg) == y


def test_batched_forward_matches_single(cfgs):
    vocab = build_vocabulary(cfgs)
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), 8)
    table = GraphTable(cfgs[:5], vocab)
    pairs = np.array([(0, 1), (1, 0), (2, 2), (4, 3), (0, 4)])
    batched = predict_pairs(table, pairs, p, cfg, chunk=2)
    single = [forward(cfgs[i], cfgs[j], vocab, p, cfg) for i, j in pairs]
    assert np.allclose(batched, single, rtol=0, atol=1e-12)


def test_sub_batch_matches_full_table(cfgs):
    vocab = build_vocabulary(cfgs)
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), 9)
    table = GraphTable(cfgs[:8], vocab)
    pairs = np.array([(3, 6), (6, 3), (5, 5)])
    sub = forward_pairs(table, pairs, p, cfg).data[:, 0]
    alone = [forward(cfgs[i], cfgs[j], vocab, p, cfg) for i, j in pairs]
    assert np.allclose(sub, alone, atol=1e-12)


def test_unseen_labels_route_to_unk(cfgs):
    vocab = build_vocabulary(cfgs[:1])
    cfg = ModelConfig(vocab.size)
    p = init_params(cfg)
    g = LabeledCfg(("never seen", "also new"), ((0, 1),))
    assert 0 < forward(g, cfgs[5], vocab, p, cfg) < 1


@settings(max_examples=20, deadline=None)
@given(graphs(max_nodes=7), graphs(max_nodes=7), st.data())
def test_permutation_invariance(g1, g2, data):
    vocab = build_vocabulary([g1, g2])
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), data.draw(st.integers(0, 50)))
    perm = data.draw(st.permutations(range(len(g1))))
    a = forward(g1, g2, vocab, p, cfg)
    b = forward(g1.permuted(perm), g2, vocab, p, cfg)
    assert abs(a - b) < 1e-9


# --- gradients ----------------------------------------------------------------------------------


def _loss_fn(table, pairs, targets, params, cfg, hist):
    def f():
        return ad.mse(forward_pairs(table, pairs, params, cfg, histograms=hist), targets)

    return f


@pytest.mark.parametrize("seed", range(3))
def test_all_parameter_gradients_match_finite_differences(cfgs, seed):
    vocab = build_vocabulary(cfgs[:4])
    cfg = small_config(vocab.size, seed=seed)
    p = spread(init_params(cfg), 100 + seed)
    table = GraphTable(cfgs[:4], vocab)
    pairs = np.array([(0, 1), (2, 3), (1, 1)])
    targets = np.array([0.3, 0.1, 1.0])
    # histograms are constants to the optimizer; the finite-difference oracle holds them fixed too
    hist = pair_histograms(table, pairs, p, cfg)
    f = _loss_fn(table, pairs, targets, p, cfg, hist)
    p.zero_grad()
    with Tape():
        loss = f()
    ad.backward(loss)
    for name, t in p.items():
        elementwise, normwise = gradient_errors(t.grad, finite_difference(lambda: f().item(), t.data))
        assert elementwise <= 1e-4 and normwise <= 1e-4, name


def test_histogram_path_gets_zero_gradient(cfgs):
    vocab = build_vocabulary(cfgs[:3])
    cfg = small_config(vocab.size)
    p = spread(init_params(cfg), 11)
    table = GraphTable(cfgs[:3], vocab)
    pairs = np.array([(0, 1), (1, 2)])
    grads = []
    for hist in (None, pair_histograms(table, pairs, p, cfg)):
        p.zero_grad()
        with Tape() as tape:
            loss = ad.mse(forward_pairs(table, pairs, p, cfg, histograms=hist), [0.5, 0.5])
        ad.backward(loss)
        grads.append({k: t.grad.copy() for k, t in p.items()})
    stops = [n for n in tape.nodes if n.op == "stop_gradient"]
    assert stops == []  # frozen histograms never touch the tape
    # live histograms: the stop node exists and its rule emits exact zeros
    with Tape() as tape:
        forward_pairs(table, pairs, p, cfg)
    (node,) = [n for n in tape.nodes if n.op == "stop_gradient"]
    (g,) = node.backward(np.ones_like(node.out.data))
    assert np.all(g == 0.0)
    for k in grads[0]:
        assert np.array_equal(grads[0][k], grads[1][k]), k


# --- checkpoints ---------------------------------------------------------------------------------


def test_checkpoint_round_trip_bit_identical(tmp_path, cfgs):
    vocab = build_vocabulary(cfgs[:10])
    cfg = ModelConfig(vocab.size, seed=4)
    p = spread(init_params(cfg), 12, 0.2)
    save_checkpoint(tmp_path / "m.json", cfg, vocab, p)
    cfg2, vocab2, p2 = load_checkpoint(tmp_path / "m.json")
    assert cfg2 == cfg and vocab2 == vocab
    table = GraphTable(cfgs, vocab)
    pairs = np.random.default_rng(0).integers(0, len(cfgs), (50, 2))
    assert np.array_equal(predict_pairs(table, pairs, p, cfg), predict_pairs(table, pairs, p2, cfg2))


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "funcgnn-checkpoint", "version": 99}')
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(bad)
    bad.write_text("not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.json")
