import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from mesonet.analytic import (AnalyticError, ConflictGraph, aloha_throughput, csma_flow_throughput,
                              ctmc_oracle_throughput, enumerate_independent_sets, gray_region_sweep,
                              parse_graph_file, schedule_for_target, silence_probability, sum_of_products)
from mesonet.channel import Calibration
from mesonet.topology import line


def hidden_terminal():
    return ConflictGraph([1, 2, 3], {(1, 2), (2, 3)}, [(1, 2, 1.0), (3, 2, 1.0)])


@st.composite
def conflict_graphs(draw, max_n=6):
    n = draw(st.integers(2, max_n))
    nodes = list(range(1, n + 1))
    pairs = list(itertools.combinations(nodes, 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [p for p, m in zip(pairs, mask) if m] or [pairs[0]]
    flows = []
    for a, b in edges:
        if draw(st.booleans()):
            a, b = (b, a) if draw(st.booleans()) else (a, b)
            flows.append((a, b, draw(st.floats(0.01, 1.0))))
    if not flows:
        flows = [(edges[0][0], edges[0][1], draw(st.floats(0.01, 1.0)))]
    return ConflictGraph(nodes, set(edges), flows)


# ---------------------------------------------------------------- ALOHA

def test_aloha_values():
    assert aloha_throughput(0.0) == 0.0
    assert aloha_throughput(0.5) == pytest.approx(math.exp(-1) / 2, abs=1e-12)
    assert aloha_throughput(1.0) == pytest.approx(math.exp(-2), abs=1e-12)


def test_aloha_negative_load():
    with pytest.raises(AnalyticError):
        aloha_throughput(-0.1)


def test_aloha_peak_by_golden_section():
    res = minimize_scalar(lambda G: -aloha_throughput(G), bracket=(0.0, 0.3, 2.0), method="golden",
                          tol=1e-12)
    # a flat maximum pins the location only to ~sqrt(eps); the peak value is far tighter
    assert res.x == pytest.approx(0.5, abs=1e-7)
    assert -res.fun == pytest.approx(1 / (2 * math.e), abs=1e-12)


# ---------------------------------------------------------------- independent sets and SP

def test_independent_sets_small_graphs():
    two = ConflictGraph(["a", "b"], {("a", "b")})
    assert set(enumerate_independent_sets(two)) == {frozenset(), frozenset("a"), frozenset("b")}
    path = ConflictGraph(["a", "b", "c"], {("a", "b"), ("b", "c")})
    assert set(enumerate_independent_sets(path)) == {frozenset(), frozenset("a"), frozenset("b"),
                                                     frozenset("c"), frozenset("ac")}
    k4 = ConflictGraph([1, 2, 3, 4], set(itertools.combinations([1, 2, 3, 4], 2)))
    assert len(enumerate_independent_sets(k4)) == 5


def test_enumeration_cap_named():
    g = ConflictGraph(list(range(5)), set())
    with pytest.raises(AnalyticError, match="cap of 4"):
        enumerate_independent_sets(g, cap=4)


def test_sum_of_products_examples():
    g = ConflictGraph([1, 2], set(), [])
    assert sum_of_products([], g) == 1.0
    single = ConflictGraph([1, 2], {(1, 2)}, [(1, 2, 2.0)])
    assert sum_of_products([1], single) == 3.0
    # two non-adjacent senders with unit rate
    pair = ConflictGraph([1, 2, 3, 4], {(1, 2), (3, 4)}, [(1, 2, 1.0), (3, 4, 1.0)])
    assert sum_of_products([1, 3], pair) == 4.0


def test_silence_probability_examples():
    g = ConflictGraph([1, 2], {(1, 2)}, [(1, 2, 1.0), (2, 1, 1.0)])
    assert silence_probability([], g) == 1.0
    assert silence_probability([1], g) == pytest.approx(2 / 3)
    spv = sum_of_products([1, 2], g)
    assert silence_probability([1, 2], g) == pytest.approx(1 / spv)


@given(conflict_graphs())
@settings(max_examples=60, deadline=None)
def test_sp_recursion(graph):
    g = dict(zip(graph.transmitters, graph.node_rates()))
    V = set(graph.transmitters)
    for i in graph.transmitters:
        lhs = sum_of_products(V, graph)
        rhs = sum_of_products(V - {i}, graph) + g[i] * sum_of_products(V - {i} - graph.neighbors(i), graph)
        assert lhs == pytest.approx(rhs, rel=1e-12)


# ---------------------------------------------------------------- CSMA flows

def test_two_node_flow():
    g = ConflictGraph([1, 2], {(1, 2)}, [(1, 2, 1.0)])
    assert csma_flow_throughput(g).s[(1, 2)] == pytest.approx(0.5, abs=1e-12)
    assert ctmc_oracle_throughput(g).s[(1, 2)] == pytest.approx(0.5, abs=1e-12)


def test_hidden_terminal():
    sol = csma_flow_throughput(hidden_terminal())
    assert sol.sp_v == pytest.approx(4.0)
    assert sol.s[(1, 2)] == pytest.approx(0.25, abs=1e-12)
    assert sol.s[(3, 2)] == pytest.approx(0.25, abs=1e-12)
    oracle = ctmc_oracle_throughput(hidden_terminal())
    assert oracle.s[(1, 2)] == pytest.approx(0.25, abs=1e-12)


def test_light_load_limit():
    g = ConflictGraph([1, 2, 3], {(1, 2), (2, 3)}, [(1, 2, 1e-9), (3, 2, 1e-9)])
    sol = csma_flow_throughput(g)
    for f, s in sol.s.items():
        assert s / sol.g[f] == pytest.approx(1.0, abs=1e-8)


def test_flow_must_follow_an_edge():
    with pytest.raises(AnalyticError, match="not adjacent"):
        ConflictGraph([1, 2], set(), [(1, 2, 1.0)])


def test_oracle_empty_flows():
    sol = ctmc_oracle_throughput(ConflictGraph([1, 2], {(1, 2)}, []))
    assert sol.s == {}


@given(conflict_graphs())
@settings(max_examples=80, deadline=None)
def test_formula_matches_ctmc(graph):
    a = csma_flow_throughput(graph)
    b = ctmc_oracle_throughput(graph)
    for f in a.s:
        assert abs(a.s[f] - b.s[f]) < 1e-9
        assert 0 < a.s[f] <= a.g[f]


def test_extra_edge_can_raise_throughput():
    # the two leaves now silence each other, so the hub is free more often
    flows = [(1, 2, 1.0), (3, 1, 1.0), (4, 1, 1.0)]
    star = csma_flow_throughput(ConflictGraph([1, 2, 3, 4], {(1, 2), (1, 3), (1, 4)}, flows))
    linked = csma_flow_throughput(ConflictGraph([1, 2, 3, 4], {(1, 2), (1, 3), (1, 4), (3, 4)}, flows))
    assert star.s[(1, 2)] == pytest.approx(0.2)
    assert linked.s[(1, 2)] == pytest.approx(0.25)


@given(conflict_graphs(), st.floats(1.05, 4.0), st.data())
@settings(max_examples=60, deadline=None)
def test_busier_blocker_never_helps(graph, factor, data):
    """Scaling up a flow that starts inside ``N_i ∪ N_j`` cannot raise ``s_ij``."""
    base = csma_flow_throughput(graph).s
    k = data.draw(st.integers(0, len(graph.flows) - 1))
    src = graph.flows[k][0]
    flows = [(i, j, g * factor if n == k else g) for n, (i, j, g) in enumerate(graph.flows)]
    after = csma_flow_throughput(ConflictGraph(graph.transmitters, graph.adjacency, flows)).s
    for n, (i, j, _) in enumerate(graph.flows):
        if n != k and src in graph.neighbors(i) | graph.neighbors(j):
            assert after[(i, j)] <= base[(i, j)] + 1e-12


def test_inverse_schedule_roundtrip():
    g = hidden_terminal()
    target = {(1, 2): 0.2, (3, 2): 0.15}
    rates = schedule_for_target(g, target)
    trial = ConflictGraph(g.transmitters, g.adjacency, [(i, j, rates[(i, j)]) for i, j, _ in g.flows])
    sol = csma_flow_throughput(trial)
    for f, s in target.items():
        assert sol.s[f] == pytest.approx(s, rel=1e-8)


def test_inverse_schedule_beyond_capacity():
    g = ConflictGraph([1, 2], {(1, 2)}, [(1, 2, 1.0)])
    with pytest.raises(AnalyticError):
        schedule_for_target(g, {(1, 2): 1.5})


# ---------------------------------------------------------------- gray region and parsing

def test_gray_region_sweep_crossover():
    cal = Calibration()
    sweep = gray_region_sweep(line(15), cal.zigbee_airtime, cal.lora_airtime)
    by_d = {d: (z, lo) for d, _, z, lo in sweep.rows}
    assert by_d[100.0][0] > 5 * by_d[100.0][1]
    assert all(lo > z for d, (z, lo) in by_d.items() if d >= 1300)
    assert 400 <= sweep.crossover <= 1300
    lo, hi = sweep.band
    assert 400 <= lo <= hi <= 1300


def test_parse_graph_file():
    graph, loads = parse_graph_file("# two nodes\nnode 1 2\nedge 1 2\nflow 1 2 1.0\naloha 0.5 1\n")
    assert csma_flow_throughput(graph).s[(1, 2)] == pytest.approx(0.5)
    assert loads == [0.5, 1.0]


def test_parse_graph_file_line_numbers():
    with pytest.raises(AnalyticError, match="line 2"):
        parse_graph_file("node 1 2\nbogus 3\n")
    with pytest.raises(AnalyticError, match="line 1"):
        parse_graph_file("flow 1 2 abc\n")


def test_random_graphs_fast():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        edges = {(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < 0.5} or {(0, 1)}
        flows = [(a, b, float(rng.uniform(0.01, 1))) for a, b in sorted(edges)]
        g = ConflictGraph(list(range(n)), edges, flows)
        a, b = csma_flow_throughput(g), ctmc_oracle_throughput(g)
        assert max(abs(a.s[f] - b.s[f]) for f in a.s) < 1e-9
