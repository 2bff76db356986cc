import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustertest.generators import gen_config_model
from clustertest.graph import Graph, QueryLedger
from clustertest.rng import stream
from clustertest.spectral import exact_gram
from clustertest.walks import (
    ConfigurationError,
    EndpointDistribution,
    WalkConfig,
    empirical_endpoint_distribution,
    estimate_gram,
    l2_norm_test,
    run_walk,
    walk_endpoints,
)

from oracles import walk_distribution

K2 = Graph(2, [(0, 1)])
TRIANGLE_EDGES = [(0, 1), (1, 2), (2, 0)]
TRIANGLE = Graph(3, TRIANGLE_EDGES)


def test_walk_config_validation():
    WalkConfig(0, 1)
    with pytest.raises(ValueError):
        WalkConfig(-1, 1)
    with pytest.raises(ValueError):
        WalkConfig(1, 0)


def test_self_loop_vertex_stays_put():
    g = Graph(1, [(0, 0)])
    assert run_walk(g, 0, 50, stream(0)) == 0


def test_k2_one_step_uniform():
    dist = empirical_endpoint_distribution(K2, 0, 1, 100_000, stream(1))
    assert abs(dist.q(0) - 0.5) < 0.01
    assert sum(dist.counts.values()) == dist.R


def test_triangle_long_walk_near_uniform():
    dist = empirical_endpoint_distribution(TRIANGLE, 0, 30, 100_000, stream(2))
    exact = walk_distribution(3, TRIANGLE_EDGES, 0, 30)
    tv = 0.5 * np.abs(dist.as_vector(3) - exact).sum()
    assert tv < 0.02


def test_histogram_matches_exact_column():
    g = gen_config_model(30, 3, 4)
    edges = g.edges.tolist()
    dist = empirical_endpoint_distribution(g, 5, 6, 100_000, stream(3))
    exact = walk_distribution(30, edges, 5, 6, g.loop_slots.tolist())
    assert np.abs(dist.as_vector(30) - exact).max() < 0.02


def test_single_walk_and_zero_steps():
    dist = empirical_endpoint_distribution(TRIANGLE, 1, 7, 1, stream(0))
    assert sum(dist.counts.values()) == 1
    dist = empirical_endpoint_distribution(TRIANGLE, 2, 0, 25, stream(0))
    assert dist.counts == {2: 25}
    assert isinstance(dist, EndpointDistribution)


def test_walks_are_reproducible_and_charged():
    ledger = QueryLedger()
    a = walk_endpoints(TRIANGLE, np.zeros(100, dtype=int), 10, stream(9), ledger)
    b = walk_endpoints(TRIANGLE, np.zeros(100, dtype=int), 10, stream(9))
    assert np.array_equal(a, b)
    assert ledger.neighbor_queries == ledger.degree_queries > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_walk_stays_within_t_hops(seed, t):
    # On a path, a t-step walk moves at most t positions.
    n = 15
    g = Graph(n, [(i, i + 1) for i in range(n - 1)] + [(0, 0), (n - 1, n - 1)])
    ends = walk_endpoints(g, np.full(50, 7), t, stream(seed))
    assert np.all(np.abs(ends - 7) <= t)


def test_norm_tester_rejects_concentrated_mass():
    # Vertex 0 has degree 1 and t=0, so the squared norm is exactly 1.
    g = Graph(3, [(0, 1), (1, 2), (2, 2)])
    R = math.ceil(16 * math.sqrt(g.vol) / 0.1)
    rejects = sum(not l2_norm_test(g, 0, 0.5, R, 0, stream(i), delta=0.1).accept for i in range(50))
    assert rejects == 50


def test_norm_tester_accepts_mixed_regular_graph():
    g = gen_config_model(200, 4, 1)
    sigma = 8 / g.vol
    delta = 0.1
    R = math.ceil(16 * math.sqrt(g.vol) / delta)
    accepts = sum(l2_norm_test(g, 0, sigma, R, 200, stream(i), delta=delta).accept for i in range(40))
    assert accepts >= 36


def test_norm_tester_statistic_is_unbiased():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    exact = exact_gram(g, [0], 3)[0, 0]
    zs = [l2_norm_test(g, 0, 1.0, 200, 3, stream(i), delta=1.0).statistic for i in range(400)]
    se = np.std(zs) / math.sqrt(len(zs))
    assert abs(np.mean(zs) - exact) <= 4 * se


def test_norm_tester_rejects_small_R():
    g = gen_config_model(50, 4, 0)
    with pytest.raises(ConfigurationError):
        l2_norm_test(g, 0, 0.1, 10, 5, stream(0), delta=0.1)


def test_gram_t_zero_diagonal():
    g = Graph(3, [(0, 1), (0, 2), (1, 2), (1, 1)])
    est = estimate_gram(g, [0, 1], 0, 5, stream(0), unbiased_diagonal=False)
    assert est[0, 0] == pytest.approx(1 / g.deg[0])
    assert est[1, 1] == pytest.approx(1 / g.deg[1])
    assert est[0, 1] == 0


def test_gram_k2_limit():
    est = estimate_gram(K2, [0, 1], 1, 100_000, stream(5))
    assert np.allclose(est, 0.5, atol=0.01)


def test_gram_is_symmetric_and_reproducible():
    g = gen_config_model(40, 3, 2)
    a = estimate_gram(g, [0, 3, 3, 9], 4, 300, stream(1))
    assert np.array_equal(a, a.T)
    assert np.array_equal(a, estimate_gram(g, [0, 3, 3, 9], 4, 300, stream(1)))


def test_gram_estimator_unbiased_on_random_graph():
    rng = np.random.default_rng(0)
    n = 50
    edges = [(i, (i + 1) % n) for i in range(n)] + [tuple(rng.integers(0, n, 2).tolist()) for _ in range(40)]
    g = Graph(n, edges)
    sources, t, R = [1, 1, 20, 33], 3, 200
    exact = exact_gram(g, sources, t)
    draws = np.array([estimate_gram(g, sources, t, R, stream(7, i)) for i in range(200)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(mean - exact) <= 3 * se + 1e-12)


def test_gram_variance_within_envelope():
    g = gen_config_model(60, 3, 3)
    t, R = 2, 40
    exact = exact_gram(g, [0, 1], t)
    sigma = max(exact[0, 0], exact[1, 1])
    draws = [estimate_gram(g, [0, 1], t, R, stream(11, i))[0, 1] for i in range(600)]
    envelope = sigma / R**2 + 2 * sigma**1.5 / R
    assert np.var(draws) <= envelope
