"""Per-link channel processes: Gilbert-Elliott loss for Zigbee, AR(1) RSSI for LoRa.

Zigbee links are undirected; one hidden two-state chain per link drives both
the 30 ms beacons and the data frames that cross it. LoRa uplinks carry an
RSSI process whose autocorrelation decays with the environment's coherence
time; frame success is a logistic function of the RSSI at transmit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GOOD, BAD = 0, 1
PACKET_BITS = 29 * 8
ZIGBEE_BPS = 77_634  # single-hop back-to-back, free space
LORA_BPS = 4_579


@dataclass
class GilbertElliottLink:
    p_good_to_bad: float
    p_bad_to_good: float
    prr_good: float = 1.0
    prr_bad: float = 0.0
    step: float = 0.030
    state: int = GOOD

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good", "prr_good", "prr_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.prr_good < self.prr_bad:
            raise ValueError("prr_good must be >= prr_bad")
        if self.step <= 0:
            raise ValueError("step must be positive")

    @property
    def stationary_good(self) -> float:
        tot = self.p_good_to_bad + self.p_bad_to_good
        return 1.0 if tot == 0 else self.p_bad_to_good / tot

    @property
    def mean_prr(self) -> float:
        pg = self.stationary_good
        return pg * self.prr_good + (1 - pg) * self.prr_bad

    def prr(self, state: int) -> float:
        return self.prr_good if state == GOOD else self.prr_bad


def step_link(link: GilbertElliottLink, rng: np.random.Generator) -> int:
    """Advance the hidden chain one step and return the new state."""
    p = link.p_good_to_bad if link.state == GOOD else link.p_bad_to_good
    if rng.random() < p:
        link.state = BAD if link.state == GOOD else GOOD
    return link.state


def beacon_outcome(link: GilbertElliottLink, rng: np.random.Generator) -> int:
    return int(rng.random() < link.prr(link.state))


def ge_states(link: GilbertElliottLink, n: int, rng: np.random.Generator, start: int) -> np.ndarray:
    """``n`` consecutive hidden states generated run by run, starting in ``start``."""
    out = np.empty(n, dtype=np.int8)
    pos, state = 0, start
    while pos < n:
        p = link.p_good_to_bad if state == GOOD else link.p_bad_to_good
        run = n - pos if p == 0 else int(rng.geometric(p))
        out[pos:pos + run] = state
        pos += run
        state ^= 1
    return out


@dataclass
class RssiProcess:
    mean_dbm: float
    sigma: float
    coherence_time: float
    t: float | None = None
    value: float | None = None

    def __post_init__(self):
        if self.coherence_time <= 0:
            raise ValueError("coherence_time must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def sample_rssi(proc: RssiProcess, t: float, rng: np.random.Generator) -> float:
    """AR(1) update toward the mean with decay ``exp(-dt / coherence_time)``."""
    if proc.t is None:
        proc.value = proc.mean_dbm + proc.sigma * rng.standard_normal()
    else:
        dt = t - proc.t
        if dt < 0:
            raise ValueError(f"time regression: {t} < {proc.t}")
        rho = math.exp(-dt / proc.coherence_time)
        innov = proc.sigma * math.sqrt(max(0.0, 1 - rho * rho)) * rng.standard_normal()
        proc.value = proc.mean_dbm + rho * (proc.value - proc.mean_dbm) + innov
    proc.t = t
    return proc.value


@dataclass(frozen=True)
class ZigbeeEnv:
    p_good_to_bad: float
    p_bad_to_good: float
    prr_good: float
    prr_bad: float


ZIGBEE_ENVS = {
    "free": ZigbeeEnv(0.0, 1.0, 1.0, 1.0),
    # rare deep fades (~5 % of beacons, ~2 s long); good-state PRR 0.86 before per-link spread
    "built": ZigbeeEnv(0.0008, 0.015, 0.86, 0.0),
    # one measured urban link on its own: mean PRR 0.666, long partial-reception bursts
    "urban": ZigbeeEnv(0.036, 0.024, 1.0, 0.45),
}
COHERENCE = {"free": 11.6, "built": 6.5, "urban": 6.5}


@dataclass(frozen=True)
class Calibration:
    environment: str = "built"
    zigbee_airtime: float = PACKET_BITS / ZIGBEE_BPS
    lora_airtime: float = PACKET_BITS / LORA_BPS
    beacon_period: float = 0.030
    prr_good: float | None = None
    prr_bad: float | None = None
    p_good_to_bad: float | None = None
    p_bad_to_good: float | None = None
    coherence: float | None = None
    rssi_sigma: float | None = None
    rssi_mean_at_500m: float = -69.3
    path_loss_slope: float = 0.8  # effective exponent; 10*n dB per decade
    lora_floor: float = -74.0  # RSSI at 50 % frame success
    lora_floor_width: float = 0.7
    ack_rssi_noise: float = 0.5
    shadowing_sigma: float = 6.6  # static per-node offset, dB
    link_quality_concentration: float | None = 10.0  # Beta concentration of per-link prr_good

    def __post_init__(self):
        if self.environment not in ZIGBEE_ENVS:
            raise ValueError(f"unknown environment {self.environment!r}")
        if self.zigbee_airtime <= 0 or self.lora_airtime <= 0:
            raise ValueError("airtimes must be positive")

    def zigbee_env(self) -> ZigbeeEnv:
        base = ZIGBEE_ENVS[self.environment]
        return ZigbeeEnv(*(v if (o := getattr(self, k)) is None else o
                           for k, v in zip(("p_good_to_bad", "p_bad_to_good", "prr_good", "prr_bad"),
                                           (base.p_good_to_bad, base.p_bad_to_good, base.prr_good, base.prr_bad))))

    @property
    def coherence_time(self) -> float:
        return self.coherence if self.coherence is not None else COHERENCE[self.environment]

    @property
    def sigma(self) -> float:
        if self.rssi_sigma is not None:
            return self.rssi_sigma
        return 2.0 if self.environment == "free" else 1.0

    def mean_rssi(self, d: float) -> float:
        d = max(d, 1.0)
        return self.rssi_mean_at_500m - 10.0 * self.path_loss_slope * math.log10(d / 500.0)

    def lora_success(self, rssi: float) -> float:
        z = (rssi - self.lora_floor) / self.lora_floor_width
        return 1.0 / (1.0 + math.exp(-z)) if z > -50 else 0.0

    def with_overrides(self, **kw) -> "Calibration":
        return replace(self, **kw)


def draw_link_model(calib: "Calibration", rng: np.random.Generator) -> GilbertElliottLink:
    """Zigbee link with its own static good-state reception, centred on the calibrated value.

    With ``link_quality_concentration`` unset every link gets the calibrated
    ``prr_good``; otherwise it is Beta distributed with that mean.
    """
    z = calib.zigbee_env()
    good = z.prr_good
    k = calib.link_quality_concentration
    if k is not None and 0 < good < 1:
        good = float(rng.beta(good * k, (1 - good) * k))
        good = max(good, z.prr_bad)
    return GilbertElliottLink(z.p_good_to_bad, z.p_bad_to_good, good, z.prr_bad, step=calib.beacon_period)


def calibrate_from_distance(d: float, environment: str = "built", calib: Calibration | None = None):
    """Default link models at distance ``d`` meters from the gateway."""
    if d < 0:
        raise ValueError("negative distance")
    calib = calib or Calibration(environment=environment)
    if calib.environment != environment:
        calib = replace(calib, environment=environment)
    z = calib.zigbee_env()
    link = GilbertElliottLink(z.p_good_to_bad, z.p_bad_to_good, z.prr_good, z.prr_bad,
                              step=calib.beacon_period)
    rssi = RssiProcess(calib.mean_rssi(d), calib.sigma, calib.coherence_time)
    return link, rssi


@dataclass
class LinkChannel:
    """Lazily generated beacon and state history for one Zigbee link.

    Beacon ``k`` goes out at ``phase + k * step``; the hidden state for
    ``[phase + k*step, phase + (k+1)*step)`` is ``states[k]``.
    """

    model: GilbertElliottLink
    rng: np.random.Generator
    phase: float = 0.0
    chunk: int = 4096
    states: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))
    bits: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))

    def _extend(self, k: int) -> None:
        while len(self.states) <= k:
            if len(self.states):
                start = int(self.states[-1])
                m = self.model
                p = m.p_good_to_bad if start == GOOD else m.p_bad_to_good
                if self.rng.random() < p:
                    start ^= 1
            else:
                start = GOOD if self.rng.random() < self.model.stationary_good else BAD
            st = ge_states(self.model, self.chunk, self.rng, start)
            prr = np.where(st == GOOD, self.model.prr_good, self.model.prr_bad)
            b = (self.rng.random(self.chunk) < prr).astype(np.int8)
            self.states = np.concatenate([self.states, st])
            self.bits = np.concatenate([self.bits, b])

    def index(self, t: float) -> int:
        """Index of the last beacon sent at or before ``t`` (-1 before the first)."""
        return math.floor((t - self.phase) / self.model.step + 1e-12)

    def state_at(self, t: float) -> int:
        k = max(self.index(t), 0)
        self._extend(k)
        return int(self.states[k])

    def window(self, t: float, alpha: int) -> np.ndarray:
        """Last ``alpha`` beacon bits at time ``t``, oldest first."""
        k = self.index(t)
        if k < 0:
            return np.empty(0, dtype=np.int8)
        self._extend(k)
        return self.bits[max(0, k - alpha + 1):k + 1]

    def n_beacons(self, t: float) -> int:
        return max(self.index(t) + 1, 0)
