import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ctx
from jointvlmc import vlmc
from jointvlmc.counts import build_count_trie
from jointvlmc.vlmc import (ModelError, ProbabilisticContextTree, embed_markov, kl_rate,
                            sample, state_string)


def fav_x():
    return ProbabilisticContextTree(2, {ctx("1"): [1 / 3, 2 / 3], ctx("12"): [1 / 3, 2 / 3],
                                        ctx("22"): [2 / 3, 1 / 3]})


def random_model(seed, k=2):
    rng = np.random.default_rng(seed)
    tree = [ctx("1"), ctx("12"), ctx("22")] if k == 2 else [()]
    return ProbabilisticContextTree(k, {s: rng.dirichlet(np.ones(k) * 2) for s in tree})


def test_lookup_context():
    m = fav_x()
    assert m.lookup_context(ctx("21")) == ctx("1")
    assert m.lookup_context(ctx("112")) == ctx("12")
    assert m.lookup_context(ctx("22")) == ctx("22")
    with pytest.raises(ModelError):
        m.lookup_context(ctx("2"))


def test_invalid_models():
    with pytest.raises(ModelError):
        ProbabilisticContextTree(2, {ctx("1"): [0.5, 0.5]})  # incomplete
    with pytest.raises(ModelError):
        ProbabilisticContextTree(2, {(): [0.5, 0.6]})


def test_state_string():
    assert state_string(1, 2, 2) == ctx("12")
    assert state_string(2, 2, 2) == ctx("21")


def test_memoryless_embedding():
    emb = embed_markov(ProbabilisticContextTree(2, {(): [0.25, 0.75]}))
    assert emb.order == 1
    np.testing.assert_allclose(emb.pi, [0.25, 0.75], atol=1e-12)


def test_symmetric_chain_uniform():
    m = ProbabilisticContextTree(2, {ctx("1"): [1 / 3, 2 / 3], ctx("2"): [2 / 3, 1 / 3]})
    np.testing.assert_allclose(embed_markov(m).pi, [0.5, 0.5], atol=1e-12)


def test_residual_small(favorable):
    for model in (favorable.model_x, favorable.model_y):
        emb = embed_markov(model)
        assert emb.residual() <= 1e-10
        assert emb.pi.sum() == pytest.approx(1, abs=1e-12)


def test_power_iteration_agrees_with_dense(monkeypatch):
    dense = embed_markov(fav_x(), order=4).pi
    monkeypatch.setattr(vlmc, "DENSE_LIMIT", 0)
    power = embed_markov(fav_x(), order=4).pi
    np.testing.assert_allclose(power, dense, atol=1e-10)


def test_reducible_chain_rejected():
    m = ProbabilisticContextTree(2, {ctx("1"): [1.0, 0.0], ctx("2"): [0.0, 1.0]})
    with pytest.raises(ModelError):
        embed_markov(m)


def test_transient_states_allowed():
    # "2" always returns to "1", which is absorbing
    m = ProbabilisticContextTree(2, {ctx("1"): [1.0, 0.0], ctx("2"): [1.0, 0.0]})
    np.testing.assert_allclose(embed_markov(m).pi, [1.0, 0.0], atol=1e-12)


def test_embedding_order_limits():
    with pytest.raises(ModelError):
        embed_markov(fav_x(), order=1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_higher_order_embedding_residual(seed, order):
    emb = embed_markov(random_model(seed), order)
    assert emb.residual() <= 1e-10


def test_sample_length_and_alphabet():
    x = sample(fav_x(), 1000, seed=1)
    assert x.shape == (1000,) and set(np.unique(x)) <= {0, 1}
    assert sample(fav_x(), 1, seed=1).shape == (1,)


def test_sample_seed_determinism():
    np.testing.assert_array_equal(sample(fav_x(), 500, 7), sample(fav_x(), 500, 7))
    assert not np.array_equal(sample(fav_x(), 500, 7), sample(fav_x(), 500, 8))


def test_sample_symbol_frequencies():
    n = 200_000
    x = sample(fav_x(), n, seed=3)
    pi = embed_markov(fav_x()).pi
    pi1 = pi[0] + pi[2]  # states 11 and 21
    sd = math.sqrt(pi1 * (1 - pi1) / n)
    # positive correlation inflates the variance; 10 sd is loose but meaningful
    assert abs((x == 0).mean() - pi1) < 10 * sd


def test_sample_conditional_frequencies_within_3_sigma():
    m = fav_x()
    x = sample(m, 10 ** 6, seed=4)
    trie = build_count_trie(x, 2, 2)
    emb = embed_markov(m)
    for s, theta in m.theta.items():
        states = [w for w in range(4) if m.lookup_context(state_string(w, 2, 2)) == s]
        if emb.pi[states].sum() < 0.05:
            continue
        counts = trie.get_counts(s)
        total = counts.sum()
        for a in range(2):
            sd = math.sqrt(theta[a] * (1 - theta[a]) / total)
            assert abs(counts[a] / total - theta[a]) <= 3 * sd


def test_sample_iid_model():
    m = ProbabilisticContextTree(3, {(): [0.2, 0.3, 0.5]})
    x = sample(m, 30000, seed=0)
    freq = np.bincount(x, minlength=3) / x.size
    np.testing.assert_allclose(freq, [0.2, 0.3, 0.5], atol=4 * math.sqrt(0.25 / 30000))


def test_kl_spec_examples():
    half = ProbabilisticContextTree(2, {(): [0.5, 0.5]})
    third = ProbabilisticContextTree(2, {(): [1 / 3, 2 / 3]})
    assert kl_rate(half, third) == pytest.approx(0.084963, abs=1e-6)
    sure = ProbabilisticContextTree(2, {(): [1.0, 0.0]})
    assert kl_rate(sure, half) == pytest.approx(1.0, abs=1e-12)


def test_kl_iid_example():
    p = ProbabilisticContextTree(2, {(): [0.5, 0.5]})
    q = ProbabilisticContextTree(2, {(): [0.25, 0.75]})
    assert kl_rate(p, q) == pytest.approx(1 - 0.5 * math.log2(3), abs=1e-9)
    assert kl_rate(p, q) == pytest.approx(0.2075187496, abs=1e-9)


def test_kl_markov_example():
    p = ProbabilisticContextTree(2, {ctx("1"): [1 / 3, 2 / 3], ctx("2"): [2 / 3, 1 / 3]})
    q = ProbabilisticContextTree(2, {(): [0.5, 0.5]})
    expect = 1 - (math.log2(3) - 2 / 3)
    assert kl_rate(p, q) == pytest.approx(expect, abs=1e-9)
    assert kl_rate(p, q) == pytest.approx(0.0817041659, abs=1e-9)


def test_kl_deterministic_vs_fair():
    p = ProbabilisticContextTree(2, {ctx("1"): [0.0, 1.0], ctx("2"): [1.0, 0.0]})
    q = ProbabilisticContextTree(2, {(): [0.5, 0.5]})
    assert kl_rate(p, q) == pytest.approx(1.0, abs=1e-12)


def test_kl_infinite_on_support_mismatch():
    p = ProbabilisticContextTree(2, {(): [0.5, 0.5]})
    q = ProbabilisticContextTree(2, {(): [1.0, 0.0]})
    assert kl_rate(p, q) == math.inf
    assert kl_rate(q, p) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_kl_properties(s1, s2):
    p, q = random_model(s1), random_model(s2)
    assert kl_rate(p, p) == pytest.approx(0.0, abs=1e-12)
    value = kl_rate(p, q)
    assert value >= 0
    assert kl_rate(p, q, order=4) == pytest.approx(value, abs=1e-9)


def test_kl_cache_reuse():
    cache = {}
    p, q = fav_x(), random_model(5)
    a = kl_rate(p, q, cache=cache)
    assert 2 in cache
    assert kl_rate(p, q, cache=cache) == a
