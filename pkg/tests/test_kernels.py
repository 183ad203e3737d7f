import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgraphon import (
    FDKernel,
    FractionalPartition,
    Graph,
    GridMeasure,
    HardModeInfeasible,
    InvalidInput,
    ResolutionGuard,
    ResolutionMismatch,
    embed_graph,
    kernel_to_partition,
    pushforward,
    quotient,
    refine,
    sample_doubly_stochastic,
    sample_fractional_partition,
)
from sgraphon.kernels import count_balanced, enumerate_balanced_labels, quotient_batch
from tests.oracles import brute_quotient, triple_sum_pushforward

ANTI = np.array([[0.0, 0.5], [0.5, 0.0]])


def random_measure(rng, k):
    x = rng.random((k, k))
    x = x + x.T
    return GridMeasure(x / x.sum())


# -- pushforward ------------------------------------------------------------


def test_pushforward_hand_example():
    s = np.array([[0.75, 0.25], [0.25, 0.75]])
    out = pushforward(FDKernel(s), GridMeasure(ANTI)).masses
    oracle = triple_sum_pushforward(s.tolist(), ANTI.tolist())
    np.testing.assert_allclose(oracle, [[3 / 16, 5 / 16], [5 / 16, 3 / 16]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(out, oracle, rtol=0, atol=1e-15)


def test_pushforward_identity_and_averaging():
    rng = np.random.default_rng(0)
    m = random_measure(rng, 4)
    np.testing.assert_allclose(pushforward(FDKernel(np.eye(4)), m).masses, m.masses, rtol=0, atol=1e-16)
    out = pushforward(FDKernel(np.full((4, 4), 0.25)), m).masses
    np.testing.assert_allclose(out, 1 / 16, rtol=0, atol=1e-15)


def test_pushforward_mixed_resolutions():
    f = sample_doubly_stochastic(3, seed=1)
    m = GridMeasure(ANTI)
    out = pushforward(f, m)
    assert out.resolution == 6
    s6 = f.refined(2).weights
    m6 = refine(m, 3).masses
    np.testing.assert_allclose(out.masses, triple_sum_pushforward(s6.tolist(), m6.tolist()), atol=1e-15)


def test_pushforward_resolution_guard():
    with pytest.raises(ResolutionGuard):
        pushforward(FDKernel(np.eye(4097)), GridMeasure.uniform(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
def test_pushforward_is_an_s_graphon(ks, km, seed):
    rng = np.random.default_rng(seed)
    out = pushforward(sample_doubly_stochastic(ks, seed), random_measure(rng, km))
    assert abs(out.masses.sum() - 1) <= 1e-12
    assert np.max(np.abs(out.masses - out.masses.T)) <= 1e-12


# -- quotient ---------------------------------------------------------------


def test_quotient_examples():
    rng = np.random.default_rng(1)
    m = random_measure(rng, 3)
    np.testing.assert_array_equal(quotient(FractionalPartition(np.eye(3)), m), m.masses)
    np.testing.assert_allclose(quotient(FractionalPartition.uniform(3, 3), m), 1 / 9, rtol=0, atol=1e-16)


def test_quotient_matches_brute_force():
    rng = np.random.default_rng(2)
    m = random_measure(rng, 5)
    p = sample_fractional_partition(5, 3, seed=4)
    np.testing.assert_allclose(quotient(p, m), brute_quotient(p.weights.tolist(), m.masses.tolist()), atol=1e-15)


def test_quotient_resolution_mismatch():
    with pytest.raises(ResolutionMismatch):
        quotient(FractionalPartition.uniform(3, 2), GridMeasure.uniform(2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 10**6), st.booleans())
def test_uniform_measure_collapse(m, k, seed, hard):
    mode = "hard" if hard and m % k == 0 else "soft"
    q = quotient(sample_fractional_partition(m, k, seed, mode), GridMeasure.uniform(m))
    np.testing.assert_allclose(q, 1 / k**2, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(1, 5), st.integers(0, 10**6))
def test_quotient_in_mk_star(m, k, seed):
    rng = np.random.default_rng(seed)
    q = quotient(sample_fractional_partition(m, k, seed), random_measure(rng, m))
    assert np.all(q >= 0)
    assert np.array_equal(q, q.T)
    assert abs(q.sum() - 1) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(1, 4), st.integers(0, 10**6))
def test_quotient_permutation_equivariance_is_exact(n, k, seed):
    rng = np.random.default_rng(seed)
    edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() < 0.5} or {(1, 2)}
    g = Graph.from_edges(n, edges)
    perm = rng.permutation(n)
    p = sample_fractional_partition(n, k, seed)
    assert np.array_equal(quotient(p, embed_graph(g.permuted(perm))), quotient(p.permuted(np.argsort(perm)), embed_graph(g)))
    assert np.array_equal(quotient(p.permuted(perm), embed_graph(g.permuted(perm))), quotient(p, embed_graph(g)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.sampled_from([1, 2, 4, 8]), st.integers(0, 10**6))
def test_quotient_refinement_consistency_exact_for_dyadic_factors(m, k, r, seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, m)
    p = sample_fractional_partition(m, k, seed)
    assert np.array_equal(quotient(p, mu), quotient(p.refined(r), refine(mu, r)))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.sampled_from([3, 5, 7]), st.integers(0, 10**6))
def test_quotient_refinement_consistency_other_factors(m, k, r, seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, m)
    p = sample_fractional_partition(m, k, seed)
    np.testing.assert_allclose(quotient(p, mu), quotient(p.refined(r), refine(mu, r)), rtol=0, atol=1e-15)


def test_quotient_batch_agrees_with_quotient():
    rng = np.random.default_rng(5)
    mu = random_measure(rng, 6)
    ps = [sample_fractional_partition(6, 3, 0, "soft", (i,)) for i in range(20)]
    batch = quotient_batch(np.stack([p.weights for p in ps]), mu.masses)
    for p, q in zip(ps, batch):
        np.testing.assert_allclose(q, quotient(p, mu), rtol=0, atol=1e-15)


# -- bridge -----------------------------------------------------------------


def test_bridge_examples():
    assert np.array_equal(kernel_to_partition(FDKernel(np.eye(3))).weights, np.eye(3))
    u = np.full((4, 4), 0.25)
    assert np.array_equal(kernel_to_partition(FDKernel(u)).weights, u)


def test_bridge_random_pairs():
    rng = np.random.default_rng(6)
    for i in range(1000):
        size = int(rng.integers(1, 9))
        f = sample_doubly_stochastic(size, 11, (i,))
        m = random_measure(rng, size)
        np.testing.assert_allclose(quotient(kernel_to_partition(f), m), pushforward(f, m).masses, rtol=0, atol=1e-12)


# -- samplers ---------------------------------------------------------------


def test_doubly_stochastic_sampler():
    assert np.array_equal(sample_doubly_stochastic(1, 0).weights, [[1.0]])
    for m in (2, 5, 17, 64):
        s = sample_doubly_stochastic(m, 3).weights
        assert np.all(s > 0)
        assert np.max(np.abs(s.sum(axis=0) - 1)) <= 1e-10
        assert np.max(np.abs(s.sum(axis=1) - 1)) <= 1e-10
    a = sample_doubly_stochastic(3, 42).weights
    b = sample_doubly_stochastic(3, 42).weights
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_doubly_stochastic(3, 43).weights)
    assert not np.array_equal(a, sample_doubly_stochastic(3, 42, (1,)).weights)


def test_partition_sampler_soft():
    a = sample_fractional_partition(4, 2, 7, "soft").weights
    b = sample_fractional_partition(4, 2, 7, "soft").weights
    assert a.tobytes() == b.tobytes()
    for m, k in ((4, 2), (7, 3), (30, 4), (5, 8)):
        p = sample_fractional_partition(m, k, 1).weights
        assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-10
        assert np.max(np.abs(p.sum(axis=0) - m / k)) <= 1e-10 * m


def test_partition_sampler_hard():
    p = sample_fractional_partition(5, 5, 3, "hard").weights
    assert np.array_equal(p.sum(axis=0), np.ones(5)) and np.array_equal(p.sum(axis=1), np.ones(5))
    assert set(np.unique(p)) == {0.0, 1.0}
    p = sample_fractional_partition(12, 3, 3, "hard").weights
    assert np.array_equal(p.sum(axis=0), [4.0, 4.0, 4.0])
    with pytest.raises(HardModeInfeasible):
        sample_fractional_partition(5, 2, 0, "hard")
    with pytest.raises(InvalidInput):
        sample_fractional_partition(5, 2, 0, "fuzzy")


def test_uniform_partition_always_feasible():
    for m, k in ((1, 1), (3, 5), (7, 2)):
        FractionalPartition.uniform(m, k)


def test_balanced_enumeration():
    for m, k in ((4, 2), (6, 3), (6, 2), (3, 3), (5, 1)):
        labels = list(enumerate_balanced_labels(m, k))
        assert len(labels) == count_balanced(m, k)
        assert len({tuple(x) for x in labels}) == len(labels)
        assert all(np.array_equal(np.bincount(x, minlength=k), np.full(k, m // k)) for x in labels)
    assert count_balanced(5, 2) == 0


def test_partition_validation():
    with pytest.raises(InvalidInput):
        FractionalPartition(np.array([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(InvalidInput):
        FDKernel(np.array([[0.5, 0.4], [0.5, 0.6]]))
