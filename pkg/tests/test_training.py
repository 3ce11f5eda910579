import numpy as np
import pytest

from lexan.corpus import Corpus, CorpusSet, build_vocabulary, to_iob2
from lexan.crf import CrfParams, log_likelihood
from lexan.network import network_backward, network_forward
from lexan.synthetic import toy_corpus
from lexan.tagset import Tag, build_label_space
from lexan.training import (BatchGrads, CrfGrads, ModelConfig, OptimizerConfig, SamplerState,
                            Schedule, batch_gradients, finetune_crf, init_params, next_batch,
                            param_digest, sgd_step, train)

TOY_TAGS = list("ABCDEF")


@pytest.fixture
def toy():
    space = build_label_space([Tag(t) for t in TOY_TAGS])
    words = toy_corpus(7, 40, TOY_TAGS)
    sents = [to_iob2(w, space) for w in words]
    vocab = build_vocabulary((s.chars for s in sents), 1)
    data = [(vocab.encode(s.chars), s.labels) for s in sents]
    return space, words, sents, vocab, data


def test_balanced_batch_composition():
    st = SamplerState([300, 120, 77, 50, 51], np.random.default_rng(0))
    cfg = OptimizerConfig()
    assert cfg.resolved_batch_size(5) == 250
    for _ in range(20):
        batch = next_batch(st, cfg)
        assert len(batch) == 250
        assert np.bincount([c for c, _ in batch]).tolist() == [50] * 5


def test_batch_size_must_match():
    with pytest.raises(ValueError):
        OptimizerConfig(batch_size=200).resolved_batch_size(5)


def test_exactly_full_corpus_is_a_permutation():
    st = SamplerState([50], np.random.default_rng(3))
    for _ in range(4):
        assert sorted(i for _, i in next_batch(st, OptimizerConfig())) == list(range(50))


def test_restart_semantics_size_120():
    st = SamplerState([120], np.random.default_rng(5))
    draws = [i for _ in range(3) for _, i in next_batch(st, OptimizerConfig())]
    first, rest = draws[:120], draws[120:]
    assert sorted(first) == list(range(120))
    assert len(set(rest)) == len(rest) == 30
    counts = np.bincount(draws, minlength=120)
    assert set(counts.tolist()) <= {1, 2}
    assert st.restarts == [1]


def test_sampler_rejects_empty():
    with pytest.raises(ValueError):
        SamplerState([3, 0], np.random.default_rng(0))


def test_init_params_range_and_determinism():
    a_net, a_crf = init_params(42, 30, 12, ModelConfig(8, 6, 2))
    b_net, b_crf = init_params(42, 30, 12, ModelConfig(8, 6, 2))
    arrays = [x for _, x in list(a_net.arrays()) + list(a_crf.arrays())]
    assert all(np.all((x >= -0.1) & (x <= 0.1)) for x in arrays)
    assert all(x.any() for x in arrays)
    assert param_digest(list(a_net.arrays()) + list(a_crf.arrays())) == \
        param_digest(list(b_net.arrays()) + list(b_crf.arrays()))
    c_net, _ = init_params(43, 30, 12, ModelConfig(8, 6, 2))
    assert not np.array_equal(c_net.embedding, a_net.embedding)


def test_init_mean():
    net, _ = init_params(1, 800, 4, ModelConfig(128, 2, 1))
    assert net.embedding.size >= 10**5
    assert abs(net.embedding.mean()) <= 0.002


def test_sgd_zero_gradient(toy):
    space, _, _, vocab, data = toy
    net, crf = init_params(0, vocab.size, space.size, ModelConfig(4, 3, 1))
    _, g = batch_gradients(net, crf, data[:2])
    for _, a in list(g.network.layers[0].arrays()):
        a[...] = 0
    g.network.embedding_rows[...] = 0
    g.network.proj_w[...] = 0
    g.network.proj_b[...] = 0
    g.crf.transitions[...] = 0
    g.crf.start[...] = 0
    before = param_digest(list(net.arrays()) + list(crf.arrays()))
    sgd_step(net, crf, g, OptimizerConfig())
    assert param_digest(list(net.arrays()) + list(crf.arrays())) == before


def test_sgd_scalar_example():
    crf = CrfParams(np.array([[1.0]]), np.array([0.0]))
    from lexan.network import NetworkGrads, zeros_like_network

    net = zeros_like_network(2, 1, 1, 1, 1)
    zero = zeros_like_network(2, 1, 1, 1, 1)
    g = BatchGrads(NetworkGrads(np.array([], int), np.zeros((0, 1)), zero.layers, zero.proj_w, zero.proj_b),
                   CrfGrads(np.array([[-2.0]]), np.array([0.0])))  # loss gradient +2 -> ascent direction -2
    sgd_step(net, crf, g, OptimizerConfig(base_lr=1e-3))
    assert crf.transitions[0, 0] == pytest.approx(0.998, abs=1e-15)


def test_sgd_two_sentence_manual_oracle(toy):
    space, _, _, vocab, data = toy
    net, crf = init_params(0, vocab.size, space.size, ModelConfig(4, 3, 2))
    cfg = OptimizerConfig(base_lr=0.1, embedding_lr=0.3, per_corpus=2)
    batch = data[:2]
    expected_net, expected_crf = net.copy(), crf.copy()
    grads = []
    for ids, y in batch:
        em, tape = network_forward(net, ids)
        _, de, dt, ds = log_likelihood(em, y, crf)
        grads.append((network_backward(net, tape, de), dt, ds))
    emb = sum(g.dense_embedding(vocab.size) for g, _, _ in grads) / 2
    expected_net.embedding += 0.3 * emb
    for k, layer in enumerate(expected_net.layers):
        for i, (_, p) in enumerate(layer.arrays()):
            p += 0.1 * sum(list(g.layers[k].arrays())[i][1] for g, _, _ in grads) / 2
    expected_net.proj_w += 0.1 * sum(g.proj_w for g, _, _ in grads) / 2
    expected_net.proj_b += 0.1 * sum(g.proj_b for g, _, _ in grads) / 2
    expected_crf.transitions += 0.1 * sum(dt for _, dt, _ in grads) / 2
    expected_crf.start += 0.1 * sum(ds for _, _, ds in grads) / 2

    _, g = batch_gradients(net, crf, batch)
    sgd_step(net, crf, g, cfg)
    for (name, a), (_, b) in zip(list(net.arrays()) + list(crf.arrays()),
                                 list(expected_net.arrays()) + list(expected_crf.arrays())):
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0, err_msg=name)


def test_small_step_decreases_nll(toy):
    space, _, _, vocab, data = toy
    net, crf = init_params(3, vocab.size, space.size, ModelConfig(8, 6, 2))
    batch = data[:6]
    ll0, g = batch_gradients(net, crf, batch)
    sgd_step(net, crf, g, OptimizerConfig(base_lr=1e-5, embedding_lr=1e-5))
    ll1, _ = batch_gradients(net, crf, batch)
    assert ll1 > ll0


def test_finetune_freezes_network(toy):
    space, _, _, vocab, data = toy
    net, crf = init_params(0, vocab.size, space.size, ModelConfig(8, 6, 1))
    before = param_digest(net.arrays())
    crf_before = param_digest(crf.arrays())
    seen = []
    tuned = finetune_crf(net, crf, data, passes=5, lr=0.05, batch_size=len(data),
                         monitor=lambda step, ll: seen.append(ll))
    assert param_digest(net.arrays()) == before
    assert param_digest(crf.arrays()) == crf_before  # input CRF is not touched
    assert param_digest(tuned.arrays()) != crf_before
    assert all(b >= a for a, b in zip(seen, seen[1:]))
    with pytest.raises(ValueError):
        finetune_crf(net, crf, [])


def corpus_set(space, words, names=("web", "human"), sources=("machine", "human")):
    half = len(words) // len(names)
    return CorpusSet([Corpus(n, s, [to_iob2(w, space) for w in words[i * half:(i + 1) * half]])
                      for i, (n, s) in enumerate(zip(names, sources))])


def test_finetune_schedule(toy):
    space, words, *_ = toy
    res = train(corpus_set(space, words), space, model_cfg=ModelConfig(4, 3, 1, 1),
                opt=OptimizerConfig(per_corpus=4), schedule=Schedule(finetune_every=3, max_batches=10))
    assert [e["batch"] for e in res.log if e.get("event") == "finetune_crf"] == [3, 6, 9]
    assert Schedule().finetune_every == 10_000


def test_patience_zero_stops_at_first_eval(toy):
    space, words, *_ = toy
    res = train(corpus_set(space, words), space, model_cfg=ModelConfig(4, 3, 1, 1),
                opt=OptimizerConfig(base_lr=0.0, embedding_lr=0.0, per_corpus=4),
                schedule=Schedule(finetune_every=None, max_batches=50, eval_every=5, patience=0),
                dev=words[:5])
    assert res.stopped_early and res.batches == 5
    evals = [e for e in res.log if "dev_accuracy" in e]
    assert [e["batch"] for e in evals] == [0, 5]
    assert all({"batch", "mean_loglik", "dev_accuracy"} <= set(e) for e in evals[1:])


def test_training_is_seed_deterministic(toy):
    space, words, *_ = toy

    def run(seed):
        r = train(corpus_set(space, words), space, model_cfg=ModelConfig(4, 3, 1, 1),
                  opt=OptimizerConfig(base_lr=0.1, embedding_lr=0.1, per_corpus=4),
                  schedule=Schedule(finetune_every=4, max_batches=12, eval_every=4, patience=5),
                  dev=words[:5], seed=seed)
        return r.log, param_digest(r.final.network.arrays())

    assert run(1) == run(1)
    assert run(1)[1] != run(2)[1]


def test_finetune_requires_human(toy):
    space, words, *_ = toy
    with pytest.raises(ValueError):
        train(corpus_set(space, words, ("a", "b"), ("machine", "machine")), space,
              model_cfg=ModelConfig(4, 3, 1, 1), schedule=Schedule(max_batches=1))
