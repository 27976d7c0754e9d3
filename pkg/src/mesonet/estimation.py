"""Windowed link-quality metrics over beacon bit sequences, and the LoRa ACK-RSSI feature."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

DEFAULT_ALPHA = 10
NO_ACK_RSSI = -120.0


class EstimationError(ValueError):
    pass


class BitWindow:
    """Fixed-capacity FIFO of beacon outcomes (1 received, 0 lost)."""

    def __init__(self, alpha: int = DEFAULT_ALPHA, bits=()):
        if alpha < 1:
            raise EstimationError("window capacity must be >= 1")
        self.alpha = alpha
        self._bits = deque(maxlen=alpha)
        for b in bits:
            self.push(b)

    def push(self, bit) -> "BitWindow":
        if bit not in (0, 1):
            raise EstimationError(f"non-binary input {bit!r}")
        self._bits.append(int(bit))
        return self

    @property
    def count(self) -> int:
        return len(self._bits)

    @property
    def full(self) -> bool:
        return len(self._bits) == self.alpha

    def bits(self) -> np.ndarray:
        return np.fromiter(self._bits, dtype=np.int8, count=len(self._bits))

    def copy(self) -> "BitWindow":
        return BitWindow(self.alpha, self._bits)

    def __len__(self):
        return len(self._bits)

    def __repr__(self):
        return f"BitWindow({''.join(map(str, self._bits))!r}, alpha={self.alpha})"


def push_bit(window: BitWindow, bit) -> BitWindow:
    return window.push(bit)


def _as_bits(window):
    if isinstance(window, BitWindow):
        return window.bits(), window.alpha
    bits = np.asarray(window, dtype=np.int8)
    return bits, len(bits)


def prr(window) -> float:
    bits, _ = _as_bits(window)
    if len(bits) == 0:
        raise EstimationError("empty window")
    return float(bits.sum()) / len(bits)


def etx(window, alpha: int | None = None) -> float:
    """``1/PRR``; a window with no receptions is capped at ``alpha + 1``."""
    bits, cap = _as_bits(window)
    if len(bits) == 0:
        raise EstimationError("empty window")
    k = int(bits.sum())
    # len/k rounds once; 1/(k/len) can be an ulp off
    return len(bits) / k if k else float((alpha or cap) + 1)


def rnp(window, alpha: int | None = None) -> float:
    """Attempts per successful reception, ignoring losses after the last reception.

    Equals ``(position of last 1, counted from 1) / (number of 1s)``; an
    all-loss window is capped at ``alpha``.
    """
    bits, cap = _as_bits(window)
    if len(bits) == 0:
        raise EstimationError("empty window")
    ones = np.flatnonzero(bits)
    if len(ones) == 0:
        return float(alpha or cap)
    return (ones[-1] + 1) / len(ones)


def link_metrics(bits: np.ndarray, alpha: int) -> tuple[float, float]:
    """``(prr, rnp)`` for a raw bit array, the hot path used by the simulator."""
    n = len(bits)
    if n == 0:
        return 0.0, float(alpha)
    ones = np.flatnonzero(bits)
    k = len(ones)
    if k == 0:
        return 0.0, float(alpha)
    return k / n, (ones[-1] + 1) / k


@dataclass
class LoraPathEstimate:
    rssi: float | None = None
    ack_time: float | None = None
    validity: float = 6.5

    def observe_ack(self, rssi: float, t: float) -> None:
        self.rssi = rssi
        self.ack_time = t

    def age(self, now: float) -> float:
        return float("inf") if self.ack_time is None else now - self.ack_time


def lora_feature(est: LoraPathEstimate, now: float) -> tuple[float, bool]:
    """Last ACK RSSI and whether it is stale (older than the validity window)."""
    if est.rssi is None:
        return NO_ACK_RSSI, True
    return est.rssi, est.age(now) > est.validity
