import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustertest.graph import (
    FAIL,
    Graph,
    GraphFormatError,
    GraphOracle,
    QueryLedger,
    conductance,
    cut_size,
    dump_graph,
    load_graph,
    volume,
)
from clustertest.rng import child_seed, split, stream


def triangle():
    return Graph(3, [(0, 1), (1, 2), (2, 0)])


def test_load_triangle():
    g = load_graph("3 3\n0 1\n1 2\n2 0\n")
    assert list(g.deg) == [2, 2, 2]
    assert g.vol == 6


def test_load_slash_separated_single_loop():
    g = load_graph("1 1/0 0")
    assert g.deg[0] == 1
    assert g.vol == 1


def test_load_rejects_edge_count_mismatch():
    with pytest.raises(GraphFormatError):
        load_graph("2 2\n0 1\n")


@pytest.mark.parametrize("text", ["", "0 0\n", "2 1\n0 5\n", "2 1\n0\n", "x 1\n0 1\n", "2 1\n0 a\n"])
def test_load_rejects_malformed(text):
    with pytest.raises(GraphFormatError):
        load_graph(text)


def test_comments_and_blank_lines_are_skipped():
    g = load_graph("# header\n2 1\n\n0 1  # the edge\n")
    assert g.m == 1


def test_dump_load_round_trip_including_two_slot_loops():
    g = Graph.from_pairing(3, [(0, 0), (1, 2), (1, 2), (0, 1)])
    h = load_graph(dump_graph(g))
    assert np.array_equal(np.sort(h.deg), np.sort(g.deg))
    assert list(h.deg) == list(g.deg)


def test_neighbor_order_is_load_order():
    g = load_graph("4 3\n0 2\n0 1\n3 0\n")
    assert list(g.neighbors(0)) == [2, 1, 3]


def test_oracle_neighbor_and_fail():
    g = triangle()
    oracle = GraphOracle(g, stream(0))
    assert oracle.neighbor(0, 1) in (1, 2)
    assert oracle.neighbor(0, 3) is FAIL
    assert oracle.neighbor(0, 0) is FAIL
    assert oracle.ledger.neighbor_queries == 3


def test_every_call_is_charged():
    oracle = GraphOracle(triangle(), stream(0))
    oracle.random_vertex()
    oracle.degree(1)
    oracle.neighbor(1, 1)
    assert oracle.ledger.as_dict() == {"vertex_queries": 1, "degree_queries": 1, "neighbor_queries": 1, "total": 3}


def test_ledger_rejects_negative_and_merges():
    a, b = QueryLedger(), QueryLedger(1, 2, 3)
    with pytest.raises(ValueError):
        a.charge(vertex=-1)
    a.merge(b)
    assert a.total == 6


def test_single_vertex_self_loop_sampling():
    g = load_graph("1 1\n0 0\n")
    oracle = GraphOracle(g, stream(1))
    assert set(oracle.sample_many(50).tolist()) == {0}


def test_star_sampling_proportional_to_degree():
    # K_{1,3}: the center has half the volume.
    g = Graph(4, [(0, 1), (0, 2), (0, 3)])
    draws = GraphOracle(g, stream(2)).sample_many(40_000)
    assert abs(np.mean(draws == 0) - 0.5) < 0.01


def test_eta_biased_sampler_stays_within_bound():
    g = Graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)])
    oracle = GraphOracle(g, stream(3))
    eta = 0.3
    cdf = oracle._biased_cdf(eta)
    p = np.diff(np.concatenate(([0.0], cdf)))
    base = g.deg / g.vol
    assert np.all(np.abs(p - base) <= eta * base + 1e-12)


def test_sampler_argument_checks():
    oracle = GraphOracle(triangle(), stream(0))
    with pytest.raises(ValueError):
        oracle.sample_degree_proportional(eta=1.0)
    with pytest.raises(ValueError):
        oracle.sample_degree_proportional(fail_prob=0.5)


def test_failures_are_retried_and_charged():
    oracle = GraphOracle(triangle(), stream(4))
    out = oracle.sample_many(1000, fail_prob=1 / 3)
    assert len(out) == 1000
    assert oracle.ledger.vertex_queries > 1000


def test_cut_and_conductance():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert cut_size(g, [0, 1]) == 2
    assert volume(g, [0, 1]) == 4
    assert conductance(g, [0, 1]) == 0.5
    assert cut_size(g, [0], within=[0, 1]) == 1
    with pytest.raises(ValueError):
        conductance(Graph(2, [(0, 0)]), [1])


def test_graph_arrays_are_read_only():
    g = triangle()
    with pytest.raises(ValueError):
        g.deg[0] = 5


def test_rng_streams_are_reproducible_and_distinct():
    assert stream(5, "a", 1).random() == stream(5, "a", 1).random()
    assert stream(5, "a", 1).random() != stream(5, "a", 2).random()
    assert child_seed(5, "x") == child_seed(5, "x")
    assert 0 <= child_seed(5, "x") < 2**63
    a, b = split(9, 2)
    assert a.random() != b.random()


edge_lists = st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=0, max_size=30),
    )
)


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_handshake_and_symmetry(data):
    n, edges = data
    g = Graph(n, edges)
    g.check_invariants()
    loops = sum(1 for u, v in edges if u == v)
    assert g.vol == 2 * (len(edges) - loops) + loops
    assert g.adjacency().sum(axis=1).A1.tolist() == g.deg.tolist()


@settings(max_examples=40, deadline=None)
@given(edge_lists)
def test_dump_load_preserves_degrees(data):
    n, edges = data
    g = Graph(n, edges)
    h = load_graph(dump_graph(g))
    assert list(h.deg) == list(g.deg)
    assert [list(h.neighbors(v)) for v in range(n)] == [list(g.neighbors(v)) for v in range(n)]
