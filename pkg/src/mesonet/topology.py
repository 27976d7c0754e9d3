"""Node layouts, Zigbee neighbor sets and min-hop routes to the gateway.

The gateway is always node 0 at the origin. Connectivity is a disk model:
two nodes are Zigbee neighbors when their distance is within ``zigbee_range``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

GATEWAY = 0


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    positions: tuple[tuple[float, float], ...]
    zigbee_range: float = 125.0
    lora_range: float = 5000.0
    gateway: int = GATEWAY
    _adj: tuple[frozenset, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.positions) < 2:
            raise TopologyError("empty node list")
        if self.zigbee_range <= 0 or self.lora_range <= 0:
            raise TopologyError("ranges must be positive")
        pts = np.asarray(self.positions, dtype=float)
        if not np.all(np.isfinite(pts)):
            raise TopologyError("non-finite position")
        d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
        within = d <= self.zigbee_range
        np.fill_diagonal(within, False)
        adj = tuple(frozenset(np.flatnonzero(row).tolist()) for row in within)
        object.__setattr__(self, "_adj", adj)

    @property
    def n_nodes(self) -> int:
        """Number of nodes including the gateway."""
        return len(self.positions)

    @property
    def node_ids(self) -> range:
        return range(self.n_nodes)

    def check_node(self, node: int) -> None:
        if not (0 <= node < self.n_nodes):
            raise TopologyError(f"unknown node {node}")

    def isolated(self) -> list[int]:
        return [i for i in self.node_ids if i != self.gateway and not self._adj[i]]


@dataclass(frozen=True)
class RoutePath:
    node: int
    hops: tuple[int, ...]  # next hops, ending at the gateway

    @property
    def hn(self) -> int:
        return len(self.hops)

    @property
    def path(self) -> tuple[int, ...]:
        """Full node sequence from the source to the gateway."""
        return (self.node,) + self.hops

    def links(self) -> list[tuple[int, int]]:
        p = self.path
        return list(zip(p[:-1], p[1:]))


def line(n: int, spacing: float = 100.0, **ranges) -> Topology:
    if n < 1:
        raise TopologyError("empty node list")
    if spacing <= 0:
        raise TopologyError("spacing must be positive")
    pts = [(0.0, 0.0)] + [(spacing * k, 0.0) for k in range(1, n + 1)]
    return Topology(tuple(pts), **ranges)


def explicit(coords, **ranges) -> Topology:
    """Topology from ``[(x, y), ...]`` for nodes 1..N; the gateway is prepended."""
    coords = [tuple(map(float, c)) for c in coords]
    if not coords:
        raise TopologyError("empty node list")
    return Topology(((0.0, 0.0),) + tuple(coords), **ranges)


def mesh(
    n: int = 30,
    seed: int = 0,
    inner: float = 500.0,
    outer: float = 1200.0,
    min_gray: int = 15,
    step: tuple[float, float] = (75.0, 115.0),
    min_sep: float = 45.0,
    sector_deg: float = 120.0,
    max_children: int = 3,
    max_tries: int = 200,
    **ranges,
) -> Topology:
    """Seeded random mesh whose end nodes populate the ``[inner, outer]`` annulus.

    Nodes are grown outward from the gateway inside a sector, each new node
    placed one Zigbee hop from an existing one, so every layout is connected.
    Layouts with fewer than ``min_gray`` nodes in the annulus are rejected.
    """
    if n < 1:
        raise TopologyError("empty node list")
    zr = ranges.get("zigbee_range", 125.0)
    if step[1] > zr:
        raise TopologyError("mesh step exceeds zigbee range")
    rng = np.random.default_rng(seed)
    half = math.radians(sector_deg) / 2
    for _ in range(max_tries):
        pts = [(0.0, 0.0)]
        children = [0]
        guard = 0
        while len(pts) < n + 1 and guard < 50 * n:
            guard += 1
            # bias parent choice toward the frontier so chains reach the annulus
            r = np.array([math.hypot(*p) for p in pts])
            open_ = np.array([c < max_children for c in children])
            w = np.where(open_, np.exp(r / 250.0), 0.0)
            if w.sum() == 0:
                break
            parent = int(rng.choice(len(pts), p=w / w.sum()))
            px, py = pts[parent]
            base = math.atan2(py, px) if parent else rng.uniform(-half, half)
            ang = base + rng.uniform(-0.6, 0.6)
            if abs(ang) > half:
                continue
            dist = rng.uniform(*step)
            x, y = px + dist * math.cos(ang), py + dist * math.sin(ang)
            rad = math.hypot(x, y)
            if rad > outer or rad <= r[parent]:
                continue
            if min(math.hypot(x - qx, y - qy) for qx, qy in pts) < min_sep:
                continue
            pts.append((x, y))
            children.append(0)
            children[parent] += 1
        if len(pts) < n + 1:
            continue
        gray = sum(inner <= math.hypot(*p) <= outer for p in pts[1:])
        if gray >= min_gray:
            return Topology(tuple(pts), **ranges)
    raise TopologyError(f"could not place a mesh with {min_gray} gray-region nodes")


def build_topology(cfg: dict) -> Topology:
    """Build from a config mapping with a ``generator`` key (line | mesh | explicit)."""
    cfg = dict(cfg)
    gen = cfg.pop("generator", "line")
    ranges = {k: float(cfg.pop(k)) for k in ("zigbee_range", "lora_range") if k in cfg}
    if gen == "line":
        return line(int(cfg.get("n", 15)), float(cfg.get("spacing", 100.0)), **ranges)
    if gen == "mesh":
        kw = {k: cfg[k] for k in ("n", "seed", "inner", "outer", "min_gray", "min_sep", "sector_deg",
                                  "max_children") if k in cfg}
        if "step" in cfg:
            kw["step"] = tuple(float(v) for v in cfg["step"])
        return mesh(**kw, **ranges)
    if gen == "explicit":
        return explicit(cfg.get("coords", []), **ranges)
    raise TopologyError(f"unknown generator {gen!r}")


def neighbor_set(topo: Topology, node: int) -> frozenset:
    topo.check_node(node)
    return topo._adj[node]


def distance_to_gateway(topo: Topology, node: int) -> float:
    topo.check_node(node)
    x, y = topo.positions[node]
    gx, gy = topo.positions[topo.gateway]
    return math.hypot(x - gx, y - gy)


def bfs_hops(topo: Topology) -> dict[int, int]:
    """Hop distance to the gateway for every reachable node."""
    dist = {topo.gateway: 0}
    q = deque([topo.gateway])
    while q:
        u = q.popleft()
        for v in topo._adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def compute_routes(topo: Topology) -> tuple[dict[int, RoutePath], list[int]]:
    """Min-hop routes; ties go to the smallest next-hop id.

    Returns ``(routes, unreachable)``. Unreachable nodes carry no Zigbee
    traffic and run LoRa only.
    """
    dist = bfs_hops(topo)
    routes = {}
    unreachable = []
    for node in topo.node_ids:
        if node == topo.gateway:
            continue
        if node not in dist:
            unreachable.append(node)
            continue
        hops = []
        cur = node
        while cur != topo.gateway:
            cur = min(v for v in topo._adj[cur] if dist.get(v, -1) == dist[cur] - 1)
            hops.append(cur)
        routes[node] = RoutePath(node, tuple(hops))
    return routes, unreachable
