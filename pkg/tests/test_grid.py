from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgraphon import (
    EmptyEdgeSet,
    Graph,
    GridMeasure,
    InvalidInput,
    RhoMetric,
    coarsen,
    embed_graph,
    integrate_test_function,
    refine,
    rho_distance,
)
from sgraphon.grid import cell_mass
from tests.oracles import mc_features, rational_coarsen, test_function_table

ANTI = np.array([[0.0, 0.5], [0.5, 0.0]])


@st.composite
def measures(draw, max_k=6):
    k = draw(st.integers(1, max_k))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    x = rng.random((k, k)) * (rng.random((k, k)) < 0.7)
    x = x + x.T
    if x.sum() == 0:
        x[0, 0] = 1.0
    return GridMeasure(x / x.sum())


# -- construction ----------------------------------------------------------


def test_measure_validation():
    with pytest.raises(InvalidInput):
        GridMeasure(np.array([[0.5, 0.1], [0.4, 0.0]]))
    with pytest.raises(InvalidInput):
        GridMeasure(np.array([[1.5, -0.25], [-0.25, 0.0]]))
    with pytest.raises(InvalidInput):
        GridMeasure(np.array([[0.3, 0.3], [0.3, 0.3]]))
    with pytest.raises(InvalidInput):
        GridMeasure(np.ones((2, 3)) / 6)


def test_small_mass_drift_is_renormalised():
    m = GridMeasure(np.array([[0.0, 0.5 + 2e-10], [0.5 + 2e-10, 0.0]]))
    assert abs(m.masses.sum() - 1) < 1e-15
    same = GridMeasure(ANTI)
    assert same.masses is not ANTI and np.array_equal(same.masses, ANTI)


def test_measure_is_immutable():
    m = GridMeasure.uniform(3)
    with pytest.raises(ValueError):
        m.masses[0, 0] = 1.0


# -- embed_graph ------------------------------------------------------------


def test_embed_k2():
    m = embed_graph(Graph(2, frozenset({(1, 2)})))
    np.testing.assert_array_equal(m.masses, ANTI)


def test_embed_k3():
    m = embed_graph(Graph.from_edges(3, [(1, 2), (1, 3), (2, 3)]))
    expected = (np.ones((3, 3)) - np.eye(3)) / 6
    np.testing.assert_allclose(m.masses, expected, rtol=0, atol=1e-16)
    assert np.all(np.diag(m.masses) == 0)


def test_embed_star():
    m = embed_graph(Graph.from_edges(4, [(1, 2), (1, 3), (1, 4)]))
    expected = np.zeros((4, 4))
    expected[0, 1:] = expected[1:, 0] = 1 / 6
    np.testing.assert_allclose(m.masses, expected, rtol=0, atol=1e-16)


def test_embed_rejects_empty_graph():
    with pytest.raises(EmptyEdgeSet, match="non-empty edge set"):
        embed_graph(Graph(3))


def test_graph_validation():
    with pytest.raises(InvalidInput):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(InvalidInput):
        Graph.from_edges(3, [(1, 4)])
    assert Graph.from_edges(3, [(2, 1), (1, 2)]).edges == frozenset({(1, 2)})


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_embed_permutation_equivariant(n, seed):
    rng = np.random.default_rng(seed)
    edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() < 0.5} or {(1, 2)}
    g = Graph.from_edges(n, edges)
    perm = rng.permutation(n)
    lhs = embed_graph(g.permuted(perm)).masses
    rhs = embed_graph(g).masses
    np.testing.assert_array_equal(lhs[np.ix_(perm, perm)], rhs)


# -- refine / coarsen -------------------------------------------------------


def test_refine_examples():
    np.testing.assert_array_equal(refine(GridMeasure.uniform(1), 2).masses, np.full((2, 2), 0.25))
    m = GridMeasure(ANTI)
    assert refine(m, 1) is m
    out = refine(m, 2).masses
    expected = np.zeros((4, 4))
    expected[:2, 2:] = expected[2:, :2] = 1 / 8
    np.testing.assert_array_equal(out, expected)


def test_coarsen_hand_example_is_exact():
    out = coarsen(GridMeasure(ANTI), 3).masses
    oracle = rational_coarsen(ANTI.tolist(), 3)
    assert oracle == [[Fraction(c, 9) for c in row] for row in [[0, 1, 2], [1, 1, 1], [2, 1, 0]]]
    assert out.tolist() == [[float(x) for x in row] for row in oracle]


def test_coarsen_identity_and_uniform():
    m = GridMeasure(ANTI)
    assert coarsen(m, 2) is m
    for k in (1, 3, 5):
        for big_k in (1, 2, 4, 7):
            out = coarsen(GridMeasure.uniform(k), big_k).masses
            np.testing.assert_allclose(out, 1 / big_k**2, rtol=0, atol=1e-16)


@settings(max_examples=30, deadline=None)
@given(measures(max_k=5), st.integers(1, 6))
def test_coarsen_matches_rational_oracle(m, big_k):
    oracle = rational_coarsen(m.masses.tolist(), big_k)
    out = coarsen(m, big_k).masses
    assert out.tolist() == [[float(x) for x in row] for row in oracle]


@settings(max_examples=30, deadline=None)
@given(measures(max_k=6), st.integers(1, 8))
def test_coarsen_preserves_cell_masses(m, big_k):
    out = coarsen(m, big_k)
    for r in range(big_k):
        for s in range(big_k):
            exact = cell_mass(m, Fraction(r, big_k), Fraction(r + 1, big_k), Fraction(s, big_k), Fraction(s + 1, big_k))
            assert abs(out.masses[r, s] - float(exact)) <= 1e-10
    assert np.array_equal(out.masses, out.masses.T)


# -- metric -----------------------------------------------------------------


def test_enumeration_matches_rule():
    metric = RhoMetric(140)
    table = test_function_table(140)
    assert [metric.term(j) for j in range(1, 141)] == table
    assert metric.term(2) == (1, 0, 0) and metric.term(10) == (1, 2, 2) and metric.term(11) == (2, 0, 0)
    with pytest.raises(IndexError):
        metric.term(141)
    with pytest.raises(IndexError):
        metric.term(0)
    assert RhoMetric(64).uncertainty == 2.0**-64


def test_first_test_function_is_total_mass():
    metric = RhoMetric(10)
    for m in (GridMeasure.uniform(1), GridMeasure(ANTI), refine(GridMeasure(ANTI), 3)):
        assert integrate_test_function(m, 1, metric) == 1.0


def test_integrals_against_lebesgue_closed_form():
    # integral of hat(L, a) over [0,1] is 2**-L (interior) or 2**-(L+1) (end nodes)
    metric = RhoMetric(60)
    u = GridMeasure.uniform(1)
    for j in range(2, 61):
        level, a, b = metric.term(j)
        ia = 2.0**-level if 0 < a < 2**level else 2.0 ** -(level + 1)
        ib = 2.0**-level if 0 < b < 2**level else 2.0 ** -(level + 1)
        assert integrate_test_function(u, j, metric) == pytest.approx(ia * ib, abs=1e-15)


def test_integrals_match_monte_carlo():
    metric = RhoMetric(40)
    rng = np.random.default_rng(3)
    x = rng.random((3, 3))
    m = GridMeasure((x + x.T) / (x + x.T).sum())
    mc = mc_features(m.masses, 40)
    exact = metric.features(m.masses)
    assert np.all((exact >= 0) & (exact <= 1))
    np.testing.assert_allclose(exact, mc, rtol=0, atol=1e-3)
    for j in (1, 5, 17, 40):
        assert integrate_test_function(m, j, metric) == pytest.approx(exact[j - 1], abs=1e-15)


def test_rho_against_monte_carlo_oracle():
    metric = RhoMetric(8)
    a, b = GridMeasure.uniform(1), GridMeasure(ANTI)
    closed = rho_distance(a, b, metric)
    fa, fb = mc_features(a.masses, 8), mc_features(b.masses, 8, seed=999)
    mc = float(np.sum(metric.weights * np.abs(fa - fb)))
    assert closed > 0
    assert abs(closed - mc) <= 1e-3


def test_rho_identity_and_refinement():
    metric = RhoMetric()
    m = GridMeasure(ANTI)
    assert rho_distance(m, m, metric) == 0.0
    for r in (2, 3, 5):
        assert rho_distance(m, refine(m, r), metric) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(measures(), st.integers(1, 5), st.integers(1, 24))
def test_rho_refinement_invariance(m, r, depth):
    assert rho_distance(m, refine(m, r), RhoMetric(depth)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(measures(), measures(), measures())
def test_rho_is_pseudometric(a, b, c):
    metric = RhoMetric()
    ab, ba = rho_distance(a, b, metric), rho_distance(b, a, metric)
    assert ab == ba
    assert rho_distance(a, c, metric) <= ab + rho_distance(b, c, metric) + 1e-12


def test_rho_separates_dyadic_cells():
    # both measures agree on halves of each axis but not on the level-1 quadrants
    metric = RhoMetric(10)
    a = GridMeasure(np.array([[0.5, 0.0], [0.0, 0.5]]))
    b = GridMeasure(ANTI)
    assert rho_distance(a, b, metric) > 1e-3
    assert rho_distance(a, b, RhoMetric(1)) == 0.0
