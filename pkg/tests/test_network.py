import numpy as np
import pytest

from lexan.network import (GruParams, UNK_ID, bi_gru_layer, embed, forward_batch, gru_cell_step,
                           network_backward, network_forward, pad_batch, zeros_like_network)
from lexan.training import ModelConfig, init_params

from .oracles import central_diff, max_rel_error, scalar_gru_step, scalar_unidirectional


def random_cell(rng, d_in, h, scale=0.5):
    g = GruParams.zeros(d_in, h)
    for _, a in g.arrays():
        a[...] = rng.normal(scale=scale, size=a.shape)
    return g


def small_net(seed=0, vocab=9, labels=6, dims=(4, 3, 2), scale=5.0):
    net, crf = init_params(seed, vocab, labels, ModelConfig(*dims))
    for _, a in list(net.arrays()) + list(crf.arrays()):
        a *= scale
    return net, crf


def test_embed_lookup(rng):
    table = rng.normal(size=(10, 128))
    out = embed(table, [5])
    assert out.shape == (1, 128) and np.array_equal(out[0], table[5])
    assert np.array_equal(embed(table, [UNK_ID])[0], table[0])
    assert embed(table, list(range(7))).shape == (7, 128)
    with pytest.raises(IndexError):
        embed(table, [10])


def test_gru_zero_params():
    g = GruParams.zeros(3, 4)
    assert np.array_equal(gru_cell_step(g, np.ones(3), np.zeros(4)), np.zeros(4))
    v = np.array([0.2, -0.4, 0.6, 1.0])
    np.testing.assert_allclose(gru_cell_step(g, np.ones(3), v), 0.5 * v)


def test_gru_matches_scalar_reference(rng):
    for _ in range(20):
        g = random_cell(rng, 3, 3)
        x, h = rng.normal(size=3), rng.uniform(-1, 1, size=3)
        np.testing.assert_allclose(gru_cell_step(g, x, h), scalar_gru_step(g, x.tolist(), h.tolist()),
                                   atol=1e-12, rtol=0)


def test_gru_dimension_mismatch():
    with pytest.raises(ValueError):
        gru_cell_step(GruParams.zeros(3, 4), np.ones(2), np.zeros(4))


def test_bi_gru_single_step(rng):
    from lexan.network import BiGruParams

    p = BiGruParams(random_cell(rng, 3, 4), random_cell(rng, 3, 4))
    x = rng.normal(size=(1, 3))
    out = bi_gru_layer(p, x)
    z = np.zeros(4)
    np.testing.assert_allclose(out[0], np.concatenate([gru_cell_step(p.forward, x[0], z),
                                                       gru_cell_step(p.backward, x[0], z)]))
    zero = BiGruParams(GruParams.zeros(3, 4), GruParams.zeros(3, 4))
    assert np.array_equal(bi_gru_layer(zero, rng.normal(size=(5, 3))), np.zeros((5, 8)))


def test_bi_gru_reversal_oracle(rng):
    from lexan.network import BiGruParams

    for T in (1, 2, 7):
        p = BiGruParams(random_cell(rng, 3, 3), random_cell(rng, 3, 3))
        x = rng.normal(size=(T, 3))
        fw = scalar_unidirectional(p.forward, x)
        bw = scalar_unidirectional(p.backward, x[::-1])[::-1]
        np.testing.assert_allclose(bi_gru_layer(p, x), np.hstack([fw, bw]), atol=1e-12, rtol=0)


def test_full_size_shapes(space):
    net, _ = init_params(0, 50, space.size, ModelConfig())
    ids = list(range(2, 12))
    em, tape = network_forward(net, ids)
    assert em.shape == (10, 56)
    assert [l.forward.W_ux.shape[1] for l in net.layers] == [128, 512]
    assert tape.top.shape == (10, 1, 512)
    em2, _ = network_forward(net, ids, retain=False)
    assert np.array_equal(em, em2)


def test_compositional_oracle(rng):
    net, _ = small_net()
    ids = [2, 5, 3, 8, 0]
    x = embed(net.embedding, ids)
    for layer in net.layers:
        x = bi_gru_layer(layer, x)
    expected = x @ net.proj_w.T + net.proj_b
    np.testing.assert_allclose(network_forward(net, ids)[0], expected, atol=1e-12, rtol=0)


def test_hidden_states_bounded(rng):
    net, _ = small_net(scale=30.0)
    _, tape = network_forward(net, rng.integers(0, 9, 40))
    for ft, bt in tape.layers:
        for t in (ft, bt):
            assert np.all(np.abs(t.h_prev) < 1)
    assert np.all(np.abs(tape.top) < 1)


def test_backward_zero_and_bias(rng):
    net, _ = small_net()
    em, tape = network_forward(net, [2, 3, 4])
    g = network_backward(net, tape, np.zeros_like(em))
    assert all(not np.any(a) for l in g.layers for _, a in l.arrays())
    assert not np.any(g.embedding_rows) and not np.any(g.proj_w)
    d = rng.normal(size=em.shape)
    g = network_backward(net, tape, d)
    np.testing.assert_allclose(g.proj_b, d.sum(axis=0))
    with pytest.raises(ValueError):
        network_backward(net, tape, np.zeros((2, 6)))


def test_backward_finite_differences(rng):
    net, _ = small_net()
    ids = [2, 7, 0, 2, 5]
    w = rng.normal(size=(5, 6))

    def loss():
        return float(np.sum(w * network_forward(net, ids, retain=False)[0]))

    em, tape = network_forward(net, ids)
    g = network_backward(net, tape, w)
    analytic = [g.dense_embedding(net.vocab_size)] + [a for l in g.layers for _, a in l.arrays()] + [
        g.proj_w, g.proj_b]
    for (name, arr), ga in zip(net.arrays(), analytic):
        assert max_rel_error(ga, central_diff(loss, arr)) <= 1e-5, name
    assert set(g.embedding_ids.tolist()) == set(ids)


def test_padding_is_transparent(rng):
    net, _ = small_net()
    seqs = [[2, 3, 4, 5, 6, 7], [8, 2], [5, 5, 5, 1]]
    ids, lengths = pad_batch(seqs)
    em, tape = forward_batch(net, ids, lengths)
    d = rng.normal(size=em.shape) * (np.arange(ids.shape[1])[None, :, None] < lengths[:, None, None])
    g = network_backward(net, tape, d)
    total = None
    for b, s in enumerate(seqs):
        e1, t1 = network_forward(net, s)
        np.testing.assert_allclose(em[b, : len(s)], e1, atol=1e-12)
        g1 = network_backward(net, t1, d[b, : len(s)])
        dense = [g1.dense_embedding(9)] + [a for l in g1.layers for _, a in l.arrays()] + [g1.proj_w, g1.proj_b]
        total = dense if total is None else [x + y for x, y in zip(total, dense)]
    batch = [g.dense_embedding(9)] + [a for l in g.layers for _, a in l.arrays()] + [g.proj_w, g.proj_b]
    for x, y in zip(batch, total):
        np.testing.assert_allclose(x, y, atol=1e-10, rtol=0)


def test_check_catches_bad_shapes():
    net = zeros_like_network(5, 4, 3, 2, 6)
    net.check()
    net.proj_w = np.zeros((6, 5))
    with pytest.raises(ValueError):
        net.check()
