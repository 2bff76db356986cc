import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from clustertest.generators import gen_config_model
from clustertest.lowerbound import (
    InteractionSession,
    SessionError,
    closure_error_envelope,
    cycle_label_sums,
    cycle_sum_distinguisher,
    open_session,
    query_vertex,
    run_distinguisher,
    zero_sum_probability,
)
from clustertest.rng import stream

from oracles import even_noise_probability


def test_fresh_session():
    s = open_session(100, 3, 0.1, "no", seed=0)
    assert s.query_count == 0
    assert s.H == [] and s.Q == set()
    assert s.b == pytest.approx(1 / (8 * math.log(3)))


@pytest.mark.parametrize("args", [(7, 3, 0.1), (10, 2, 0.1), (10, 4, 0.6), (1, 4, 0.1)])
def test_session_validation(args):
    with pytest.raises(ValueError):
        InteractionSession(*args)


def test_sessions_replay_identically():
    a, b = open_session(500, 3, 0.1, seed=4), open_session(500, 3, 0.1, seed=4)
    assert a.case == b.case
    for q in (0, 17, 3, 99):
        assert query_vertex(a, q) == query_vertex(b, q)


def test_random_case_is_fair():
    cases = Counter(open_session(10, 3, 0.1, "random", seed=i).case for i in range(2000))
    assert abs(cases["yes"] / 2000 - 0.5) < 0.04


def test_first_query_reports_d_slots():
    s = open_session(1000, 3, 0.1, "no", seed=1)
    resp = s.query(5)
    assert len(resp.edges) == 3
    assert not resp.err


def test_requery_is_an_error():
    s = open_session(50, 3, 0.1, seed=0)
    s.query(1)
    with pytest.raises(SessionError):
        s.query(1)
    with pytest.raises(SessionError):
        s.query(50)


@pytest.mark.parametrize("case", ["yes", "no"])
def test_invariants_hold_after_full_exploration(case):
    s = open_session(60, 4, 0.2, case, seed=2)
    for v in np.random.default_rng(0).permutation(60):
        s.query(int(v))
    s.check_invariants()
    edges, labels = s.discovered_graph()
    assert len(edges) == 60 * 4 // 2
    assert np.bincount(edges.ravel(), minlength=60).tolist() == [4] * 60  # a loop lists v twice


def test_no_case_eps_zero_cycles_are_even():
    for seed in range(20):
        s = open_session(30, 3, 0.0, "no", seed=seed)
        for v in range(30):
            s.query(v)
        edges, labels = s.discovered_graph()
        # With no noise the labels are a coboundary: potentials explain every edge.
        for (u, v), y in zip(edges.tolist(), labels.tolist()):
            assert y == s.potential(u) ^ s.potential(v)


def test_forced_label_matches_exact_posterior():
    eps = 0.1
    by_length = {}
    for seed in range(3000):
        s = open_session(40, 3, eps, "no", seed=seed)
        v = 0
        while not s.R_set:
            s.query(v)
            v += 1
        e = s.H[s.R_set[0]]
        # Cycle length and label sum of the first cycle, read off the forest.
        path = s.forest_distances(e.u, math.inf)
        if e.v not in path:
            continue
        length = path[e.v] + 1
        zeta = (e.label + _forest_label_sum(s, e.u, e.v)) % 2
        by_length.setdefault(length, []).append(zeta)
    checked = 0
    for length, zetas in by_length.items():
        if len(zetas) < 400:
            continue
        checked += 1
        exact = even_noise_probability(length, eps)
        se = math.sqrt(exact * (1 - exact) / len(zetas))
        assert abs(np.mean(np.array(zetas) == 0) - exact) <= 4 * se
        assert exact == pytest.approx(zero_sum_probability(length, eps), abs=1e-12)
    assert checked >= 1


def _forest_label_sum(s, u, v):
    prev = {u: None}
    frontier = [u]
    while frontier:
        x = frontier.pop()
        for e in s.H:
            if not e.forest:
                continue
            for a, b in ((e.u, e.v), (e.v, e.u)):
                if a == x and b not in prev:
                    prev[b] = (x, e.label)
                    frontier.append(b)
    total, x = 0, v
    while prev[x] is not None:
        x, label = prev[x]
        total += label
    return total


def test_pairing_law_matches_config_model():
    n, d, runs = 4, 3, 3000
    ours, theirs = Counter(), Counter()
    for i in range(runs):
        s = open_session(n, d, 0.0, "yes", seed=i)
        for v in range(n):
            s.query(v)
        edges, _ = s.discovered_graph()
        ours[tuple(sorted(tuple(sorted(e)) for e in edges.tolist()))] += 1
        g = gen_config_model(n, d, seed=10_000 + i)
        theirs[tuple(sorted(tuple(sorted(e)) for e in g.edges.tolist()))] += 1
    keys = sorted(set(ours) | set(theirs))
    table = np.array([[ours[k] for k in keys], [theirs[k] for k in keys]])
    assert chi2_contingency(table)[1] > 0.001


def test_cycle_label_sum_methods_agree_with_formula():
    for method in ("interaction", "planted"):
        zeta = cycle_label_sums(8, 0.1, 100_000, stream(1, method), method)
        assert abs(np.mean(zeta == 0) - zero_sum_probability(8, 0.1)) < 0.01
    assert zero_sum_probability(10, 0.1) == pytest.approx(0.5537, abs=1e-4)
    with pytest.raises(ValueError):
        cycle_label_sums(4, 0.1, 10, stream(0), "other")


def test_closure_mode_runs_and_errors_are_terminal():
    errors = 0
    rounds = 0
    for seed in range(40):
        s = open_session(2000, 3, 0.1, "no", seed=seed, closure=True)
        for v in range(200):
            resp = s.query(v) if not s.err_flag else None
            rounds += 1
            if resp is None or resp.err:
                errors += 1
                assert s.query(v + 1).err
                break
        s.check_invariants()
    assert errors / rounds <= min(1.0, closure_error_envelope(2000, 3, 0.0))


def test_envelope_formula():
    assert closure_error_envelope(10**4, 3, 0.0) == pytest.approx(
        16 * 81 * math.log(1e4) ** 2 / 1e4 ** (7 / 8)
    )


def test_distinguisher_eps_zero_no_case():
    for seed in range(10):
        s = open_session(300, 3, 0.0, "no", seed=seed)
        res = cycle_sum_distinguisher(s, 4, 20, 5, stream(seed))
        if res.cycles_found:
            assert res.guess == "no" and res.zero_fraction == 1.0


def test_distinguisher_eps_half_has_no_advantage():
    results = run_distinguisher(2000, 3, 0.5, 200, 3, 4, 20, 5)
    rate = np.mean([r.correct for r in results])
    assert abs(rate - 0.5) <= 2 * math.sqrt(0.25 / len(results))


def test_distinguisher_argument_checks():
    with pytest.raises(ValueError):
        cycle_sum_distinguisher(open_session(20, 3, 0.1), 0, 1, 1)


def test_distinguisher_beats_coin_flip():
    results = run_distinguisher(10_000, 3, 0.05, 400, 7, 6, 40, 5)
    rate = np.mean([r.correct for r in results])
    queries = np.mean([r.queries for r in results])
    assert rate >= 0.55
    assert queries <= 10_000 ** 0.65 * 1.5
