"""Throughput models: pure ALOHA for LoRa and product-form multi-hop CSMA for Zigbee.

The CSMA model treats the set of simultaneously transmitting nodes as a
continuous-time Markov chain over independent sets of the carrier-sense
graph. Its stationary law is product form, so silence probabilities reduce
to ratios of sum-of-products ``SP(A)``. ``ctmc_oracle_throughput`` solves the
same chain numerically by building the generator, and is used to cross-check
the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ENUM_CAP = 20
ORACLE_CAP = 12
PACKET_BITS = 29 * 8


class AnalyticError(ValueError):
    pass


def aloha_throughput(G: float) -> float:
    """Pure-ALOHA normalized throughput ``S = G exp(-2G)``."""
    if G < 0:
        raise AnalyticError("offered traffic must be non-negative")
    return G * math.exp(-2.0 * G)


@dataclass
class ConflictGraph:
    transmitters: list[int]
    adjacency: set[tuple[int, int]]
    flows: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self):
        nodes = set(self.transmitters)
        if len(nodes) != len(self.transmitters):
            raise AnalyticError("duplicate transmitter id")
        adj = set()
        for a, b in self.adjacency:
            if a not in nodes or b not in nodes:
                raise AnalyticError(f"edge ({a}, {b}) references unknown node")
            if a == b:
                raise AnalyticError(f"self loop on {a}")
            adj.add((a, b))
            adj.add((b, a))
        self.adjacency = adj
        for i, j, g in self.flows:
            if i not in nodes or j not in nodes:
                raise AnalyticError(f"flow ({i}, {j}) references unknown node")
            if not g > 0:
                raise AnalyticError(f"flow ({i}, {j}) needs a positive rate")
            if (i, j) not in adj:
                raise AnalyticError(f"flow endpoints {i}, {j} are not adjacent")
        self._index = {v: k for k, v in enumerate(self.transmitters)}

    @property
    def n(self) -> int:
        return len(self.transmitters)

    def neighbors(self, v: int) -> set[int]:
        return {b for a, b in self.adjacency if a == v}

    def node_rates(self) -> np.ndarray:
        """Aggregate scheduled rate out of each node, in transmitter order."""
        g = np.zeros(self.n)
        for i, _, rate in self.flows:
            g[self._index[i]] += rate
        return g

    def mask(self, nodes) -> int:
        m = 0
        for v in nodes:
            if v not in self._index:
                raise AnalyticError(f"unknown node {v}")
            m |= 1 << self._index[v]
        return m

    def neighbor_masks(self) -> list[int]:
        out = [0] * self.n
        for a, b in self.adjacency:
            out[self._index[a]] |= 1 << self._index[b]
        return out


@dataclass
class ThroughputSolution:
    s: dict[tuple[int, int], float]
    g: dict[tuple[int, int], float]
    sp_v: float


def _independent_masks(graph: ConflictGraph, cap: int) -> list[int]:
    if graph.n > cap:
        raise AnalyticError(f"{graph.n} transmitters exceeds the enumeration cap of {cap}")
    nbr = graph.neighbor_masks()
    out = []

    def extend(k: int, current: int, forbidden: int) -> None:
        if k == graph.n:
            out.append(current)
            return
        extend(k + 1, current, forbidden)
        bit = 1 << k
        if not forbidden & bit:
            extend(k + 1, current | bit, forbidden | nbr[k])

    extend(0, 0, 0)
    out.sort()
    return out


def enumerate_independent_sets(graph: ConflictGraph, cap: int = ENUM_CAP) -> list[frozenset]:
    """All independent sets of the carrier-sense graph, the empty set included."""
    ids = graph.transmitters
    return [
        frozenset(ids[k] for k in range(graph.n) if m >> k & 1)
        for m in _independent_masks(graph, cap)
    ]


class _SumOfProducts:
    """Cached independent-set table for repeated SP evaluations on one graph."""

    def __init__(self, graph: ConflictGraph, cap: int = ENUM_CAP, rates=None):
        self.graph = graph
        masks = _independent_masks(graph, cap)
        self.masks = np.array(masks, dtype=np.int64)
        g = graph.node_rates() if rates is None else np.asarray(rates, dtype=float)
        prods = np.ones(len(masks))
        for k in range(graph.n):
            has = (self.masks >> k) & 1
            prods = np.where(has == 1, prods * g[k], prods)
        self.prods = prods

    def __call__(self, amask: int) -> float:
        inside = (self.masks & ~np.int64(amask)) == 0
        return float(self.prods[inside].sum())

    @property
    def full(self) -> int:
        return (1 << self.graph.n) - 1


def sum_of_products(A, graph: ConflictGraph) -> float:
    """``SP(A)``: sum over independent ``D ⊆ A`` of the product of node rates in D."""
    return _SumOfProducts(graph)(graph.mask(A))


def silence_probability(A, graph: ConflictGraph) -> float:
    """Stationary probability that every node in ``A`` is silent."""
    spc = _SumOfProducts(graph)
    amask = graph.mask(A)
    return spc(spc.full & ~amask) / spc(spc.full)


def csma_flow_throughput(graph: ConflictGraph, cap: int = ENUM_CAP) -> ThroughputSolution:
    """``s_ij = g_ij SP((N_i ∪ N_j)^c) / SP(V)`` for every flow."""
    spc = _SumOfProducts(graph, cap)
    spv = spc(spc.full)
    nbr = graph.neighbor_masks()
    idx = graph._index
    s, g = {}, {}
    for i, j, rate in graph.flows:
        blocked = nbr[idx[i]] | nbr[idx[j]]
        s[(i, j)] = rate * spc(spc.full & ~blocked) / spv
        g[(i, j)] = rate
    return ThroughputSolution(s, g, spv)


def ctmc_oracle_throughput(graph: ConflictGraph, cap: int = ORACLE_CAP) -> ThroughputSolution:
    """Solve the CSMA Markov chain directly from its generator matrix."""
    if not graph.flows:
        return ThroughputSolution({}, {}, 1.0)
    if graph.n > cap:
        raise AnalyticError(f"{graph.n} transmitters exceeds the oracle cap of {cap}")
    n = graph.n
    g = graph.node_rates()
    nbr = graph.neighbor_masks()
    # states: every subset that has no two adjacent members, found by brute force
    states = [m for m in range(1 << n)
              if all(not (m >> k & 1) or not (m & nbr[k]) for k in range(n))]
    pos = {m: k for k, m in enumerate(states)}
    rows, cols, vals = [], [], []
    for m in states:
        for k in range(n):
            bit = 1 << k
            if m & bit:
                rows.append(pos[m]); cols.append(pos[m ^ bit]); vals.append(1.0)
            elif not m & nbr[k] and g[k] > 0:
                rows.append(pos[m]); cols.append(pos[m | bit]); vals.append(g[k])
    N = len(states)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    A = Q.T.tolil()
    A[0, :] = np.ones(N)
    b = np.zeros(N)
    b[0] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    assert np.all(np.isfinite(pi)), "singular CSMA generator"
    smask = np.array(states, dtype=np.int64)
    idx = graph._index
    s, gg = {}, {}
    for i, j, rate in graph.flows:
        blocked = nbr[idx[i]] | nbr[idx[j]]
        p_silent = float(pi[(smask & blocked) == 0].sum())
        s[(i, j)] = rate * p_silent
        gg[(i, j)] = rate
    spv = float(1.0 / pi[pos[0]])
    return ThroughputSolution(s, gg, spv)


def schedule_for_target(graph: ConflictGraph, targets: dict, tol: float = 1e-10,
                        max_iter: int = 10_000) -> dict:
    """Inverse problem: scheduled rates that deliver the desired ``s_ij``.

    Fixed point ``g <- s SP(V) / SP((N_i ∪ N_j)^c)``; raises if it does not
    settle within ``max_iter`` (targets beyond capacity diverge).
    """
    flows = [(i, j) for i, j, _ in graph.flows]
    g = {f: targets[f] for f in flows}
    nbr = graph.neighbor_masks()
    idx = graph._index
    for _ in range(max_iter):
        trial = ConflictGraph(graph.transmitters, graph.adjacency, [(i, j, g[(i, j)]) for i, j in flows])
        spc = _SumOfProducts(trial)
        spv = spc(spc.full)
        new = {}
        for i, j in flows:
            blocked = nbr[idx[i]] | nbr[idx[j]]
            new[(i, j)] = targets[(i, j)] * spv / spc(spc.full & ~blocked)
        change = max(abs(new[f] - g[f]) / g[f] for f in flows)
        g = new
        if not math.isfinite(change):
            break
        if change < tol:
            return g
    raise AnalyticError("fixed point did not converge; targets may exceed capacity")


def line_conflict_graph(topo, rate: float) -> ConflictGraph:
    """Carrier-sense graph of a topology with one flow per route hop at ``rate``."""
    from .topology import compute_routes, neighbor_set

    ids = list(topo.node_ids)
    edges = {(a, b) for a in ids for b in neighbor_set(topo, a) if a < b}
    routes, _ = compute_routes(topo)
    flows = {(r.node, r.hops[0]) for r in routes.values()}
    return ConflictGraph(ids, edges, [(i, j, rate) for i, j in sorted(flows)])


@dataclass
class GraySweep:
    rows: list[tuple[float, int, float, float]]  # distance, hn, zigbee bps, lora bps
    crossover: float | None  # first distance where LoRa beats Zigbee
    band: tuple[float, float] | None  # distances where the two are within the band


def gray_region_sweep(topo, zigbee_airtime: float, lora_airtime: float, rate: float = 0.5,
                      packet_rate: float = 1 / 3, demodulators: int = 8,
                      hop_overhead: float = 0.0, band: float = 0.25) -> GraySweep:
    """Analytic end-to-end throughput per node distance for both radios.

    Each Zigbee hop costs its airtime inflated by the inverse CSMA service
    fraction ``g/s`` of that link, plus ``hop_overhead``. LoRa costs one
    airtime inflated by the ALOHA collision factor ``G/S = exp(2G)``, with
    ``G`` the network's LoRa load spread over the gateway demodulators.
    """
    from .topology import compute_routes, distance_to_gateway

    graph = line_conflict_graph(topo, rate)
    sol = csma_flow_throughput(graph)
    routes, _ = compute_routes(topo)
    n_src = len(routes)
    G = n_src * packet_rate * lora_airtime / demodulators
    lora_latency = lora_airtime * math.exp(2 * G)
    lora_bps = PACKET_BITS / lora_latency
    rows = []
    for node in sorted(routes, key=lambda v: distance_to_gateway(topo, v)):
        latency = sum(zigbee_airtime * sol.g[l] / sol.s[l] + hop_overhead for l in routes[node].links())
        rows.append((distance_to_gateway(topo, node), routes[node].hn, PACKET_BITS / latency, lora_bps))
    crossover = next((d for d, _, z, l in rows if l > z), None)
    inside = [d for d, _, z, l in rows if abs(z - l) / max(z, l) < band]
    return GraySweep(rows, crossover, (min(inside), max(inside)) if inside else None)


def parse_graph_file(text: str):
    """Parse a conflict-graph description.

    Lines: ``node ID...``, ``edge A B``, ``flow I J G``, ``aloha G...``;
    ``#`` starts a comment. Returns ``(graph or None, aloha_loads)``.
    """
    nodes, edges, flows, aloha = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        try:
            if head == "node":
                if not args:
                    raise ValueError("node needs at least one id")
                nodes.extend(int(a) for a in args)
            elif head == "edge" and len(args) == 2:
                edges.append((int(args[0]), int(args[1])))
            elif head == "flow" and len(args) == 3:
                flows.append((int(args[0]), int(args[1]), float(args[2])))
            elif head == "aloha" and args:
                aloha.extend(float(a) for a in args)
            else:
                raise ValueError(f"unrecognised directive {line!r}")
        except ValueError as exc:
            raise AnalyticError(f"line {lineno}: {exc}") from None
    if not nodes and (edges or flows):
        nodes = sorted({v for e in edges for v in e} | {v for f in flows for v in f[:2]})
    graph = ConflictGraph(nodes, set(edges), flows) if nodes else None
    if graph is None and not aloha:
        raise AnalyticError("line 1: file defines neither a graph nor aloha loads")
    return graph, aloha
