"""Discrete-event simulation of a dual-radio network: Zigbee CSMA mesh plus LoRa ALOHA star.

Events sit in one heap keyed by ``(time, insertion seq)``, so equal-time
events run in insertion order. Every random draw comes from a per-entity
substream of the master seed, which keeps runs byte-reproducible.

In ``dual`` mode every generated packet is carried by both radios
independently, which yields the paired throughputs used for labels and for
trace-driven selector comparison. In ``live`` mode the configured selector
chooses one radio per packet.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..channel import LinkChannel, RssiProcess, calibrate_from_distance, draw_link_model, sample_rssi
from ..dtree import RadioChoice
from ..estimation import LoraPathEstimate, link_metrics, lora_feature
from ..topology import Topology, build_topology, compute_routes, distance_to_gateway, neighbor_set
from .config import SimConfig

log = logging.getLogger(__name__)

Z, L = RadioChoice.ZIGBEE, RadioChoice.LORA

# event kinds
GEN, Z_TRY, Z_END, Z_ARRIVE, L_TRY, L_END, DUMMY, ROUTE_UPDATE, BEACON, SEND = range(10)
EVENT_NAMES = ("packet_gen", "tx_start", "tx_end", "hop_arrival", "lora_tx_start", "lora_tx_end",
               "dummy_uplink", "route_update", "beacon", "packet_send")

# substream tags
_S_LINK, _S_LORA, _S_TRAFFIC, _S_MAC, _S_SEL, _S_PHASE, _S_SHADOW, _S_QUALITY = range(8)


@dataclass
class Copy:
    """One radio's copy of a generated packet."""
    radio: RadioChoice
    delivered: bool = False
    dropped: bool = False
    deliver_time: float = math.nan
    attempts: int = 0
    hop: int = 0  # zigbee: index of the link currently being crossed

    @property
    def done(self) -> bool:
        return self.delivered or self.dropped


@dataclass
class PacketRecord:
    pid: int
    src: int
    gen_time: float
    hops: int
    distance: float
    x: tuple  # features at generation (hn, lora_rssi, prr_e2e, rnp_e2e) with n = rpn
    prefix_prr: np.ndarray = field(repr=False)
    prefix_rnp: np.ndarray = field(repr=False)
    copies: dict = field(default_factory=dict)
    choice: RadioChoice | None = None
    penalty: float = 0.0
    dummy: bool = False

    def latency(self, radio) -> float:
        c = self.copies.get(radio)
        return c.deliver_time - self.gen_time if c is not None and c.delivered else math.nan

    def throughput(self, radio, bits: int) -> float:
        lat = self.latency(radio)
        return bits / lat if lat == lat else 0.0

    def features(self, n: int) -> tuple:
        n = min(n, len(self.prefix_prr))
        return (self.x[0], self.x[1], float(self.prefix_prr[n - 1]), float(self.prefix_rnp[n - 1]))


@dataclass
class Broadcast:
    time: float
    src: int
    nbytes: int


@dataclass
class SimResult:
    config: SimConfig
    topology: Topology
    packets: list
    broadcasts: list
    beacons_sent: int
    end_time: float
    route_changes: int = 0
    lora_collisions: int = 0
    zigbee_no_route: int = 0

    @property
    def bits(self) -> int:
        return 8 * self.config.packet_bytes


class Simulator:
    def __init__(self, config: SimConfig, topology: Topology | None = None, selector=None):
        self.cfg = cfg = config
        self.calib = cfg.calibration
        self.topo = topology or build_topology(cfg.topology)
        self.routes, self.unreachable = compute_routes(self.topo)
        for u in self.unreachable:
            log.info("node %d has no Zigbee route; LoRa only", u)
        self.selector = selector
        if cfg.mode == "live" and selector is None:
            raise ValueError("live mode needs a selector")
        if cfg.mode == "live" and getattr(selector, "uses_truth", False):
            raise ValueError(f"selector {selector.name} needs dual-mode traces")
        self.seed = int(cfg.seed)
        n = self.topo.n_nodes
        self.dist = [distance_to_gateway(self.topo, i) for i in range(n)]
        self.nbr = [neighbor_set(self.topo, i) for i in range(n)]
        self.airtime_z = self.calib.zigbee_airtime
        self.airtime_l = self.calib.lora_airtime
        self.hop_time = self.airtime_z  # back-to-back figure already includes the link ACK

        if cfg.sources == "all":
            self.sources = [i for i in range(1, n)]
        else:
            self.sources = [i for i in range(1, n) if cfg.gray_inner <= self.dist[i] <= cfg.gray_outer]

        # channels
        self.links: dict[tuple[int, int], LinkChannel] = {}
        for r in self.routes.values():
            for a, b in r.links():
                key = (min(a, b), max(a, b))
                if key not in self.links:
                    model = draw_link_model(self.calib, self._site_rng(_S_QUALITY, *key))
                    rng = self._rng(_S_LINK, *key)
                    self.links[key] = LinkChannel(model, rng, phase=float(rng.uniform(0, cfg.beacon_period)))
        self.rssi: dict[int, RssiProcess] = {}
        self.lora_rng: dict[int, np.random.Generator] = {}
        for i in range(1, n):
            _, proc = calibrate_from_distance(self.dist[i], cfg.environment, self.calib)
            self.lora_rng[i] = self._rng(_S_LORA, i)
            # location shadowing is fixed for the run and drawn from its own stream
            proc.mean_dbm += self.calib.shadowing_sigma * float(self._site_rng(_S_SHADOW, i).standard_normal())
            self.rssi[i] = proc
        self.lora_est = {i: LoraPathEstimate(validity=cfg.lora_validity) for i in range(1, n)}
        self.traffic_rng = {i: self._rng(_S_TRAFFIC, i) for i in range(1, n)}
        self.mac_rng = {i: self._rng(_S_MAC, i) for i in range(n)}
        self.sel_rng = {i: self._rng(_S_SEL, i) for i in range(1, n)}

        # MAC state
        self.active_until = [0.0] * n
        self.zq = [deque() for _ in range(n)]
        self.zbusy = [False] * n
        self.lq = [deque() for _ in range(n)]
        self.lbusy = [False] * n
        self.lora_on_air: list = []  # [end_time, start_seq, packet, copy]
        self.prev_choice = {}
        self.conflict = {}
        for r in self.routes.values():
            for a, b in r.links():
                if (a, b) not in self.conflict:
                    self.conflict[(a, b)] = sorted(set(self.nbr[a]) | set(self.nbr[b]) | {a, b})

        self.heap: list = []
        self.seq = 0
        self.packets: list[PacketRecord] = []
        self.broadcasts: list[Broadcast] = []
        self.route_changes = 0
        self.lora_collisions = 0
        self.no_route = 0
        self.beacons_sent = 0
        self.beacon_time = 8 * cfg.beacon_bytes / (8 * cfg.packet_bytes) * self.airtime_z
        self.hn_seen = {i: (self.routes[i].hn if i in self.routes else 0) for i in range(1, n)}

    def _rng(self, *tags) -> np.random.Generator:
        return np.random.default_rng([self.seed, *map(int, tags)])

    def _site_rng(self, *tags) -> np.random.Generator:
        """Streams for static site properties, shared by every run at one site."""
        return np.random.default_rng([int(self.cfg.site_seed), 0x517E, *map(int, tags)])

    def push(self, t, kind, payload=None):
        heapq.heappush(self.heap, (t, self.seq, kind, payload))
        self.seq += 1

    # ------------------------------------------------------------ features
    def path_prefix(self, node: int, now: float):
        """Prefix-aggregated (prr, rnp) for the windows a node holds at ``now``.

        The link between path nodes ``i-1`` and ``i`` is recorded at node
        ``i-1``, so its freshest window is ``(i-1)`` hop delays old.
        """
        cfg = self.cfg
        r = self.routes.get(node)
        if r is None:
            return np.zeros(1), np.full(1, float(cfg.alpha))
        links = r.links()[:cfg.max_rpn]
        p = np.empty(len(links))
        q = np.empty(len(links))
        for i, (a, b) in enumerate(links):
            ch = self.links[(min(a, b), max(a, b))]
            bits = ch.window(now - i * cfg.per_hop_delay, cfg.alpha)
            p[i], q[i] = link_metrics(bits, cfg.alpha)
        return np.cumprod(p), np.cumsum(q)

    def features(self, node: int, now: float):
        pp, rr = self.path_prefix(node, now)
        rssi, _ = lora_feature(self.lora_est[node], now)
        n = min(self.cfg.rpn, len(pp))
        hn = self.routes[node].hn if node in self.routes else 0
        return (float(hn), float(rssi), float(pp[n - 1]), float(rr[n - 1])), pp, rr

    # ------------------------------------------------------------ main loop
    def run(self) -> SimResult:
        self._seed_events()
        self.drain()
        return self.result()

    def _seed_events(self) -> None:
        cfg = self.cfg
        if cfg.duration > 0:
            for i in self.sources:
                t0 = cfg.warmup + self.traffic_rng[i].exponential(cfg.interval)
                self.push(t0, GEN, i)
            prng = self._rng(_S_PHASE)
            for i in range(1, self.topo.n_nodes):
                if i in self.routes:
                    self.push(float(prng.uniform(0, cfg.route_update_period)), ROUTE_UPDATE, i)
            for i in self.sources:
                # first LoRa probe so the RSSI feature exists before traffic starts
                self.push(cfg.warmup * float(prng.uniform(0.25, 0.75)), DUMMY, i)
            if cfg.beacon_contention:
                for i in range(self.topo.n_nodes):
                    if self.nbr[i]:
                        self.push(float(prng.uniform(0, cfg.beacon_period)), BEACON, i)

    def inject(self, t: float, node: int) -> None:
        """Schedule one extra packet from ``node`` at ``t`` outside the Poisson traffic."""
        self.push(t, SEND, node)

    def drain(self) -> None:
        """Process events until the heap empties or the drain horizon passes."""
        cfg = self.cfg
        end = cfg.duration
        handlers = {
            GEN: self._on_gen, Z_TRY: self._on_z_try, Z_END: self._on_z_end, Z_ARRIVE: self._on_z_arrive,
            L_TRY: self._on_l_try, L_END: self._on_l_end, DUMMY: self._on_dummy, ROUTE_UPDATE: self._on_route,
            BEACON: self._on_beacon, SEND: self._new_packet,
        }
        # in-flight copies keep running past the generation horizon so
        # every copy resolves; only generation, control chatter stop at end
        drain_until = end + 30.0
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if t > drain_until:
                break
            if t > end and kind in (GEN, ROUTE_UPDATE, DUMMY, BEACON):
                continue
            handlers[kind](t, payload)

    def result(self) -> SimResult:
        cfg = self.cfg
        end = cfg.duration
        beacons = self.beacons_sent
        if not cfg.beacon_contention and cfg.duration > 0:
            per_node = int(cfg.duration / cfg.beacon_period)
            beacons = per_node * sum(1 for i in range(self.topo.n_nodes) if self.nbr[i])
        return SimResult(cfg, self.topo, self.packets, self.broadcasts, beacons, end,
                         self.route_changes, self.lora_collisions, self.no_route)

    # ------------------------------------------------------------ traffic
    def _on_gen(self, t, node):
        self._new_packet(t, node)
        self.push(t + self.traffic_rng[node].exponential(self.cfg.interval), GEN, node)

    def _new_packet(self, t, node):
        cfg = self.cfg
        x, pp, rr = self.features(node, t)
        hn = self.routes[node].hn if node in self.routes else 0
        pkt = PacketRecord(len(self.packets), node, t, hn, self.dist[node], x, pp, rr)
        self.packets.append(pkt)
        if cfg.mode == "dual":
            radios = (Z, L)
        else:
            prev = self.prev_choice.get(node)
            choice = self.selector.select(x, self.dist[node], prev, self.sel_rng[node])
            pkt.choice = choice
            pkt.penalty = self.selector.penalty(prev, choice, self.calib)
            self.prev_choice[node] = choice
            radios = (choice,)
        for radio in radios:
            c = Copy(radio)
            pkt.copies[radio] = c
            if radio == Z:
                self._z_enqueue(t, node, pkt, c)
            else:
                self._l_enqueue(t, node, pkt, c)

    # ------------------------------------------------------------ zigbee
    def _z_enqueue(self, t, node, pkt, c):
        if pkt.src not in self.routes:
            c.dropped = True
            self.no_route += 1
            return
        self.zq[node].append((pkt, c))
        if not self.zbusy[node]:
            self.zbusy[node] = True
            self.push(t, Z_TRY, node)

    def _next_hop(self, pkt, c):
        path = self.routes[pkt.src].path
        return path[c.hop + 1]

    def _on_z_try(self, t, node):
        q = self.zq[node]
        if not q:
            self.zbusy[node] = False
            return
        pkt, c = q[0]
        nxt = self._next_hop(pkt, c)
        members = self.conflict[(node, nxt)]
        au = self.active_until
        block = 0.0
        for m in members:
            if au[m] > t:
                block = max(block, au[m])
        if block > 0.0:
            rng = self.mac_rng[node]
            self.push(block + rng.uniform(self.cfg.backoff_min, self.cfg.backoff_max), Z_TRY, node)
            return
        fin = t + self.hop_time
        au[node] = fin
        au[nxt] = fin
        c.attempts += 1
        self.push(fin, Z_END, (node, nxt, t))

    def _on_z_end(self, t, payload):
        node, nxt, start = payload
        pkt, c = self.zq[node][0]
        ch = self.links[(min(node, nxt), max(node, nxt))]
        ok = self.mac_rng[node].random() < ch.model.prr(ch.state_at(start))
        if ok:
            self.zq[node].popleft()
            c.attempts = 0
            c.hop += 1
            if nxt == self.topo.gateway:
                c.delivered = True
                c.deliver_time = t
                self._finish(pkt, c)
            else:
                self.push(t + self.cfg.zigbee_hop_overhead, Z_ARRIVE, (nxt, pkt, c))
            self.push(t, Z_TRY, node)
        elif c.attempts >= self.cfg.zigbee_attempts:
            self.zq[node].popleft()
            c.dropped = True
            self._finish(pkt, c)
            self.push(t, Z_TRY, node)
        else:
            rng = self.mac_rng[node]
            wait = (self.cfg.zigbee_ack_timeout + self.cfg.zigbee_retry_delay
                    + rng.uniform(self.cfg.backoff_min, self.cfg.backoff_max))
            self.push(t + wait, Z_TRY, node)

    def _on_z_arrive(self, t, payload):
        nxt, pkt, c = payload
        self._z_enqueue(t, nxt, pkt, c)

    # ------------------------------------------------------------ lora
    def _l_enqueue(self, t, node, pkt, c):
        self.lq[node].append((pkt, c))
        if not self.lbusy[node]:
            self.lbusy[node] = True
            self.push(t, L_TRY, node)

    def _on_l_try(self, t, node):
        q = self.lq[node]
        if not q:
            self.lbusy[node] = False
            return
        pkt, c = q[0]
        rssi = sample_rssi(self.rssi[node], t, self.lora_rng[node])
        self.lora_on_air = [e for e in self.lora_on_air if e[0] > t]
        collided = len(self.lora_on_air) >= self.cfg.demodulators
        if collided:
            self.lora_collisions += 1
        fin = t + self.airtime_l
        self.lora_on_air.append((fin, node))
        c.attempts += 1
        self.push(fin, L_END, (node, rssi, collided))

    def _on_l_end(self, t, payload):
        node, rssi, collided = payload
        pkt, c = self.lq[node][0]
        rng = self.lora_rng[node]
        ok = (not collided) and rng.random() < self.calib.lora_success(rssi)
        if ok:
            self.lq[node].popleft()
            c.delivered = True
            c.deliver_time = t
            self._finish(pkt, c)
            ack = rssi + self.calib.ack_rssi_noise * rng.standard_normal()
            self.lora_est[node].observe_ack(float(ack), t)
            self.push(t + self.cfg.lora_validity, DUMMY, node)
            self.push(t + self.cfg.lora_ack_timeout, L_TRY, node)
        elif c.attempts >= self.cfg.lora_attempts:
            self.lq[node].popleft()
            c.dropped = True
            self._finish(pkt, c)
            self.push(t + self.cfg.lora_ack_timeout, L_TRY, node)
        else:
            self.push(t + self.cfg.lora_ack_timeout, L_TRY, node)

    def _on_dummy(self, t, node):
        est = self.lora_est[node]
        if est.age(t) < self.cfg.lora_validity - 1e-9 or self.lbusy[node]:
            return
        hn = self.routes[node].hn if node in self.routes else 0
        pkt = PacketRecord(-1, node, t, hn, self.dist[node], (), np.zeros(1), np.zeros(1), dummy=True)
        c = Copy(L)
        pkt.copies[L] = c
        self._l_enqueue(t, node, pkt, c)

    def _finish(self, pkt, c):
        """Reward an online learner when its chosen copy resolves."""
        sel = self.selector
        if pkt.dummy or self.cfg.mode != "live" or not hasattr(sel, "observe"):
            return
        reward = 0.0
        if c.delivered:
            lat = c.deliver_time - pkt.gen_time + getattr(pkt, "penalty", 0.0)
            reward = 8 * self.cfg.packet_bytes / lat
        sel.observe(pkt.x, c.radio, reward)

    # ------------------------------------------------------------ control plane
    def _on_beacon(self, t, node):
        """Contending beacon: skipped (not deferred) when the neighborhood is busy."""
        au = self.active_until
        if au[node] <= t and all(au[m] <= t for m in self.nbr[node]):
            fin = t + self.beacon_time
            au[node] = fin
            for m in self.nbr[node]:
                au[m] = max(au[m], fin)
            self.beacons_sent += 1
        self.push(t + self.cfg.beacon_period, BEACON, node)

    def _on_route(self, t, node):
        cfg = self.cfg
        deg = len(self.nbr[node])
        nbytes = math.ceil(cfg.alpha * deg / 8)
        self.broadcasts.append(Broadcast(t, node, nbytes))
        hn = self.routes[node].hn
        if hn != self.hn_seen[node]:
            log.info("node %d hop count %d -> %d", node, self.hn_seen[node], hn)
            self.hn_seen[node] = hn
            self.route_changes += 1
        self.push(t + cfg.route_update_period, ROUTE_UPDATE, node)


def run(config: SimConfig, topology: Topology | None = None, selector=None) -> SimResult:
    return Simulator(config, topology, selector).run()
