"""Radio-selection policies behind one ``select`` interface.

Feature vectors are ``(hn, lora_rssi, zigbee_prr, zigbee_rnp)``; ``d`` is the
node's distance to the gateway in meters; ``prev`` is the radio used for the
node's previous packet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Calibration
from .dtree import DecisionTree, RadioChoice
from .estimation import DEFAULT_ALPHA

log = logging.getLogger(__name__)

Z, L = RadioChoice.ZIGBEE, RadioChoice.LORA


class SelectorError(ValueError):
    pass


def oracle_select(tput_zigbee: float, tput_lora: float) -> RadioChoice:
    return L if tput_lora > tput_zigbee else Z


def switch_penalty(prev, nxt, calib: Calibration | None = None) -> float:
    """Three control messages on the radio being switched to; 0 when not switching."""
    if prev is None or prev == nxt:
        return 0.0
    calib = calib or Calibration()
    return 3.0 * (calib.lora_airtime if nxt == L else calib.zigbee_airtime)


# ---------------------------------------------------------------- threshold table

@dataclass(frozen=True)
class ThresholdRegion:
    d_min: float
    d_max: float
    zigbee_rr_min: float
    lora_rssi_min: float
    fallback: RadioChoice


DEFAULT_REGIONS = (
    ThresholdRegion(500.0, 700.0, 0.77, -72.0, Z),
    ThresholdRegion(700.0, 1000.0, 0.80, -71.0, L),
    ThresholdRegion(1000.0, 1200.0, 0.83, -71.0, L),
)


@dataclass(frozen=True)
class ThresholdTable:
    regions: tuple[ThresholdRegion, ...] = DEFAULT_REGIONS

    def __post_init__(self):
        if not self.regions:
            raise SelectorError("threshold table needs at least one region")
        for a, b in zip(self.regions, self.regions[1:]):
            if a.d_max > b.d_min:
                raise SelectorError("threshold regions overlap or are out of order")
        for r in self.regions:
            if r.d_max <= r.d_min:
                raise SelectorError(f"empty region [{r.d_min}, {r.d_max})")

    @classmethod
    def from_rows(cls, rows) -> "ThresholdTable":
        return cls(tuple(ThresholdRegion(float(a), float(b), float(c), float(d), RadioChoice.parse(e))
                         for a, b, c, d, e in rows))

    def region(self, d: float) -> ThresholdRegion:
        """Half-open ``[d_min, d_max)``; the last region is closed; outside distances clamp."""
        regs = self.regions
        for k, r in enumerate(regs):
            if r.d_min <= d < r.d_max or (k == len(regs) - 1 and d == r.d_max):
                return r
        if d < regs[0].d_min:
            log.debug("distance %.1f below threshold table; using first region", d)
            return regs[0]
        if d > regs[-1].d_max:
            log.debug("distance %.1f above threshold table; using last region", d)
            return regs[-1]
        # in a gap between regions: nearest edge
        return min(regs, key=lambda r: min(abs(d - r.d_min), abs(d - r.d_max)))


def threshold_select(table: ThresholdTable, x, d: float) -> RadioChoice:
    r = table.region(d)
    z_ok = x[2] >= r.zigbee_rr_min
    l_ok = x[1] >= r.lora_rssi_min
    if z_ok and not l_ok:
        return Z
    if l_ok and not z_ok:
        return L
    return r.fallback


# ---------------------------------------------------------------- Q-learning

def discretize(x, alpha: int = DEFAULT_ALPHA, max_hn: int = 64) -> tuple[int, int, int, int]:
    hn = int(min(max(round(x[0]), 1), max_hn))
    rssi = int(math.floor(min(max(x[1], -120.0), -30.0)))
    prr = int(min(max(x[2], 0.0), 1.0) * 10)
    prr = min(prr, 9)
    rnp = int(min(max(x[3], 0.0), float(alpha)))
    return hn, rssi, prr, rnp


@dataclass
class QTable:
    lr: float = 0.1
    q: dict = field(default_factory=dict)

    def value(self, state, action) -> float:
        return self.q.get((state, int(action)), 0.0)

    def greedy(self, state) -> RadioChoice:
        return L if self.value(state, L) > self.value(state, Z) else Z


def ql_update(qt: QTable, state, action, reward: float, next_state=None) -> QTable:
    """Bandit form of the Q update (discount 0), so ``next_state`` is unused."""
    if reward < 0 or not math.isfinite(reward):
        raise SelectorError(f"reward must be finite and >= 0, got {reward}")
    key = (state, int(action))
    old = qt.q.get(key, 0.0)
    qt.q[key] = old + qt.lr * (reward - old)
    return qt


# ---------------------------------------------------------------- selectors

class Selector:
    name = "base"
    uses_truth = False

    def select(self, x, d: float, prev=None, rng=None, truth=None) -> RadioChoice:
        raise NotImplementedError

    def penalty(self, prev, nxt, calib=None) -> float:
        return 0.0


class FixedZigbee(Selector):
    name = "fixed_zigbee"

    def select(self, x, d, prev=None, rng=None, truth=None):
        return Z


class FixedLoRa(Selector):
    name = "fixed_lora"

    def select(self, x, d, prev=None, rng=None, truth=None):
        return L


class OracleSelector(Selector):
    name = "oracle"
    uses_truth = True

    def select(self, x, d, prev=None, rng=None, truth=None):
        if truth is None:
            raise SelectorError("oracle needs both radios' throughputs")
        return oracle_select(*truth)


@dataclass
class ThresholdSelector(Selector):
    table: ThresholdTable = field(default_factory=ThresholdTable)
    name = "threshold"

    def select(self, x, d, prev=None, rng=None, truth=None):
        if d < 0:
            raise SelectorError("negative distance")
        return threshold_select(self.table, x, d)


@dataclass
class TaoCartSelector(Selector):
    tree: DecisionTree
    name = "taocart"

    def select(self, x, d, prev=None, rng=None, truth=None):
        return self.tree.predict_one(x)


@dataclass
class QLearningSelector(Selector):
    lr: float = 0.1
    epsilon: float = 0.1
    alpha: int = DEFAULT_ALPHA
    qtable: QTable = None
    name = "qlearning"

    def __post_init__(self):
        if self.qtable is None:
            self.qtable = QTable(lr=self.lr)

    def state(self, x):
        return discretize(x, self.alpha)

    def select(self, x, d=0.0, prev=None, rng=None, truth=None):
        if self.epsilon > 0 and rng is not None and rng.random() < self.epsilon:
            return RadioChoice(int(rng.integers(2)))
        return self.qtable.greedy(self.state(x))

    def observe(self, x, action, reward: float) -> None:
        ql_update(self.qtable, self.state(x), action, reward)

    def penalty(self, prev, nxt, calib=None) -> float:
        return switch_penalty(prev, nxt, calib)

    def train_offline(self, ds, rng: np.random.Generator) -> "QLearningSelector":
        """One epsilon-greedy pass over dataset rows in order, rewarded with the chosen throughput."""
        tputs = np.stack([ds.tput_zigbee, ds.tput_lora], axis=1)
        for x, tp in zip(ds.X, tputs):
            a = self.select(x, rng=rng)
            self.observe(x, a, float(tp[int(a)]))
        self.epsilon = 0.0
        return self

    def predict(self, X) -> np.ndarray:
        return np.array([int(self.qtable.greedy(self.state(x))) for x in np.atleast_2d(X)], dtype=np.int8)


SELECTOR_NAMES = ("oracle", "fixed_zigbee", "fixed_lora", "threshold", "taocart", "qlearning")


def make_selector(name: str, tree: DecisionTree | None = None, table: ThresholdTable | None = None,
                  qlearning: QLearningSelector | None = None) -> Selector:
    if name == "oracle":
        return OracleSelector()
    if name == "fixed_zigbee":
        return FixedZigbee()
    if name == "fixed_lora":
        return FixedLoRa()
    if name == "threshold":
        return ThresholdSelector(table or ThresholdTable())
    if name == "taocart":
        if tree is None:
            raise SelectorError("taocart needs a trained tree")
        return TaoCartSelector(tree)
    if name == "qlearning":
        if qlearning is None:
            raise SelectorError("qlearning needs a trained table")
        return qlearning
    raise SelectorError(f"unknown selector {name!r}")
