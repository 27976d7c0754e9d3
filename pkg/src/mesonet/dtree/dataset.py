"""Labeled radio-selection datasets and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .tree import FEATURES, TreeError

COLUMNS = FEATURES + ("label", "tput_zigbee", "tput_lora")


def label_from_throughput(tput_zigbee, tput_lora) -> np.ndarray:
    """1 (LoRa) where LoRa is strictly faster, else 0 (Zigbee wins ties)."""
    return (np.asarray(tput_lora) > np.asarray(tput_zigbee)).astype(np.int8)


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    tput_zigbee: np.ndarray
    tput_lora: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float)).reshape(-1, len(FEATURES))
        self.y = np.asarray(self.y, dtype=np.int8).ravel()
        self.tput_zigbee = np.asarray(self.tput_zigbee, dtype=float).ravel()
        self.tput_lora = np.asarray(self.tput_lora, dtype=float).ravel()
        n = len(self.X)
        if not (len(self.y) == len(self.tput_zigbee) == len(self.tput_lora) == n):
            raise TreeError("dataset columns have different lengths")

    @classmethod
    def from_throughput(cls, X, tput_zigbee, tput_lora) -> "LabeledDataset":
        return cls(X, label_from_throughput(tput_zigbee, tput_lora), tput_zigbee, tput_lora)

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx], self.tput_zigbee[idx], self.tput_lora[idx])

    def lora_fraction(self) -> float:
        return float(self.y.mean()) if len(self.y) else 0.0


def concat(parts) -> LabeledDataset:
    parts = list(parts)
    return LabeledDataset(np.concatenate([p.X for p in parts]), np.concatenate([p.y for p in parts]),
                          np.concatenate([p.tput_zigbee for p in parts]),
                          np.concatenate([p.tput_lora for p in parts]))


def _fmt(v: float) -> str:
    return repr(float(v))


def to_csv(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for x, lab, tz, tl in zip(ds.X, ds.y, ds.tput_zigbee, ds.tput_lora):
        w.writerow([int(x[0])] + [_fmt(v) for v in x[1:]] + [int(lab), _fmt(tz), _fmt(tl)])
    return buf.getvalue()


def from_csv(text: str) -> LabeledDataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise TreeError("empty dataset file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise TreeError(f"missing columns: {', '.join(missing)}")
    col = {c: header.index(c) for c in COLUMNS}
    body = [r for r in rows[1:] if r]
    if not body:
        raise TreeError("dataset file has no rows")
    try:
        data = np.array([[float(r[col[c]]) for c in COLUMNS] for r in body])
    except (ValueError, IndexError) as e:
        raise TreeError(f"bad dataset row: {e}") from None
    return LabeledDataset(data[:, :4], data[:, 4].astype(np.int8), data[:, 5], data[:, 6])
