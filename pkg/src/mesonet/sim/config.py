"""Simulation configuration: a flat validated dataclass loaded from YAML mappings."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..channel import ZIGBEE_ENVS, Calibration


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


CHANNEL_KEYS = {f.name for f in dataclasses.fields(Calibration)} - {"environment"}


@dataclass
class SimConfig:
    topology: dict = field(default_factory=lambda: {"generator": "mesh", "n": 30, "seed": 7})
    environment: str = "built"
    interval: float = 3.0  # mean seconds between packets per source (Poisson)
    duration: float = 600.0
    warmup: float = 1.0  # no traffic before this, so beacon windows are full
    seed: int = 0
    site_seed: int = 28  # static link qualities and LoRa shadowing
    mode: str = "dual"  # dual: every packet on both radios; live: selector picks one
    selector: str = "fixed_zigbee"
    tree_file: str | None = None
    rpn: int = 4
    max_rpn: int = 10
    alpha: int = 10
    beacon_period: float = 0.030
    beacon_contention: bool = False
    beacon_bytes: int = 12
    demodulators: int = 8
    packet_bytes: int = 29
    sources: str = "gray"  # gray: only nodes in [gray_inner, gray_outer] generate traffic
    gray_inner: float = 500.0
    gray_outer: float = 1200.0
    zigbee_attempts: int = 3
    zigbee_ack_timeout: float = 0.00086
    zigbee_hop_overhead: float = 0.0021
    zigbee_retry_delay: float = 0.003  # extra wait before retransmitting after a missed ACK
    backoff_min: float = 0.00032
    backoff_max: float = 0.00256
    lora_attempts: int = 3
    lora_ack_timeout: float = 0.03
    lora_validity: float = 6.5
    per_hop_delay: float = 0.033
    route_update_period: float = 5.0
    channel: dict = field(default_factory=dict)  # Calibration overrides
    threshold_table: list | None = None
    ql_lr: float = 0.1
    ql_epsilon: float = 0.1

    def __post_init__(self):
        problems = []
        if not self.interval > 0:
            problems.append(f"interval: must be > 0 (got {self.interval})")
        if self.duration < 0:
            problems.append(f"duration: must be >= 0 (got {self.duration})")
        if self.environment not in ZIGBEE_ENVS:
            problems.append(f"environment: unknown {self.environment!r}")
        if self.mode not in ("dual", "live"):
            problems.append(f"mode: must be dual or live (got {self.mode!r})")
        if self.sources not in ("gray", "all"):
            problems.append(f"sources: must be gray or all (got {self.sources!r})")
        for name in ("rpn", "max_rpn", "alpha", "demodulators", "packet_bytes", "zigbee_attempts", "lora_attempts"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name}: must be >= 1")
        if self.zigbee_retry_delay < 0:
            problems.append("zigbee_retry_delay: must be >= 0")
        for name in ("beacon_period", "route_update_period", "per_hop_delay", "lora_validity"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be > 0")
        if self.backoff_max < self.backoff_min or self.backoff_min < 0:
            problems.append("backoff_min/backoff_max: need 0 <= min <= max")
        for k in self.channel:
            if k not in CHANNEL_KEYS:
                problems.append(f"channel.{k}: unknown key")
        if not isinstance(self.topology, dict) or "generator" not in self.topology:
            problems.append("topology: needs a mapping with a 'generator' key")
        if problems:
            raise ConfigError(problems)

    @property
    def calibration(self) -> Calibration:
        return Calibration(environment=self.environment, beacon_period=self.beacon_period, **self.channel)

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


FIELDS = {f.name for f in dataclasses.fields(SimConfig)}


def from_mapping(data: dict | None, **overrides) -> SimConfig:
    data = dict(data or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(k for k in data if k not in FIELDS)
    if unknown:
        raise ConfigError([f"{k}: unknown config key" for k in unknown])
    return SimConfig(**data)
