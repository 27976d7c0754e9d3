"""Per-packet metrics, trace export, and trace-driven selector comparison."""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..dtree import LabeledDataset, RadioChoice
from ..selectors import OracleSelector, oracle_select, switch_penalty
from .engine import SimResult

Z, L = RadioChoice.ZIGBEE, RadioChoice.LORA

TRACE_COLUMNS = ("time", "src", "radio", "event", "hops", "latency_s", "tput_bps", "label")
METRIC_COLUMNS = ("selector", "packets", "mean_tput_bps", "mean_tput_delivered_bps", "mean_latency_s",
                  "plr", "zigbee_choices", "lora_choices", "overhead_fraction")


@dataclass
class Metrics:
    selector: str
    packets: int
    mean_tput_bps: float  # lost packets count as 0
    mean_tput_delivered_bps: float
    mean_latency_s: float
    plr: float
    zigbee_choices: int
    lora_choices: int
    overhead_fraction: float = 0.0

    def row(self) -> list:
        return [asdict(self)[c] for c in METRIC_COLUMNS]


def data_packets(res: SimResult, complete_only: bool = True):
    """Generated data packets; ``complete_only`` drops copies still in flight at the end."""
    out = []
    for p in res.packets:
        if p.dummy:
            continue
        if complete_only and not all(c.done for c in p.copies.values()):
            continue
        out.append(p)
    return out


def conservation(res: SimResult) -> dict:
    """Per radio: generated, delivered, dropped, in flight."""
    out = {}
    for radio in (Z, L):
        g = d = x = f = 0
        for p in res.packets:
            c = p.copies.get(radio)
            if p.dummy or c is None:
                continue
            g += 1
            d += c.delivered
            x += c.dropped
            f += not c.done
        out[str(radio)] = {"generated": g, "delivered": d, "dropped": x, "in_flight": f}
    return out


def paired_throughput(res: SimResult, packets=None):
    """``(tput_zigbee, tput_lora, latency_zigbee, latency_lora)`` arrays for dual-mode packets."""
    packets = data_packets(res) if packets is None else packets
    bits = res.bits
    tz = np.array([p.throughput(Z, bits) for p in packets])
    tl = np.array([p.throughput(L, bits) for p in packets])
    lz = np.array([p.latency(Z) for p in packets])
    ll = np.array([p.latency(L) for p in packets])
    return tz, tl, lz, ll


def summarize(name, tput, latency, choices, overhead=0.0) -> Metrics:
    tput = np.asarray(tput, dtype=float)
    latency = np.asarray(latency, dtype=float)
    ok = np.isfinite(latency)
    n = len(tput)
    choices = np.asarray(choices, dtype=int)
    return Metrics(
        selector=name,
        packets=n,
        mean_tput_bps=float(tput.mean()) if n else 0.0,
        mean_tput_delivered_bps=float(tput[ok].mean()) if ok.any() else 0.0,
        mean_latency_s=float(latency[ok].mean()) if ok.any() else math.nan,
        plr=float(1 - ok.mean()) if n else 0.0,
        zigbee_choices=int((choices == 0).sum()),
        lora_choices=int((choices == 1).sum()),
        overhead_fraction=overhead,
    )


def evaluate_selector(res: SimResult, selector, rng_seed: int = 0, packets=None):
    """Replay a dual-mode trace through ``selector``.

    Returns ``(Metrics, tput, latency, choices)``; each packet is credited
    with the outcome of the radio chosen at its generation instant.
    """
    if res.config.mode != "dual":
        raise ValueError("trace-driven evaluation needs a dual-mode run")
    packets = data_packets(res) if packets is None else packets
    bits = res.bits
    tz, tl, lz, ll = paired_throughput(res, packets)
    rng = np.random.default_rng([rng_seed, 0x5E1])
    prev: dict[int, RadioChoice] = {}
    choice = np.empty(len(packets), dtype=np.int8)
    lat = np.empty(len(packets))
    tput = np.empty(len(packets))
    oracle = isinstance(selector, OracleSelector)
    for k, p in enumerate(packets):
        if oracle:
            a = oracle_select(tz[k], tl[k])
        else:
            a = selector.select(p.x, p.distance, prev.get(p.src), rng)
        pen = selector.penalty(prev.get(p.src), a, res.config.calibration)
        prev[p.src] = a
        base = lz[k] if a == Z else ll[k]
        lat[k] = base + pen if base == base else math.nan
        tput[k] = bits / lat[k] if lat[k] == lat[k] else 0.0
        choice[k] = int(a)
    return summarize(selector.name, tput, lat, choice, overhead_fraction(res)), tput, lat, choice


def overhead_fraction(res: SimResult) -> float:
    """Bit-array bytes carried by routing broadcasts per data packet, over the data packet size.

    Both ride the same Zigbee PHY rate, so this is also the airtime fraction.
    """
    n = len([p for p in res.packets if not p.dummy])
    if n == 0 or not res.broadcasts:
        return 0.0
    extra = sum(b.nbytes for b in res.broadcasts)
    return extra / n / res.config.packet_bytes


def to_dataset(res: SimResult, n: int | None = None) -> tuple[LabeledDataset, int]:
    """Labeled rows from a dual-mode run and the number of both-lost rows excluded."""
    packets = data_packets(res)
    tz, tl, _, _ = paired_throughput(res, packets)
    keep = (tz > 0) | (tl > 0)
    n = res.config.rpn if n is None else n
    X = np.array([p.features(n) for p in packets], dtype=float).reshape(-1, 4)
    ds = LabeledDataset.from_throughput(X[keep], tz[keep], tl[keep])
    return ds, int((~keep).sum())


def _f(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if v != v else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def trace_csv(res: SimResult) -> str:
    """One row per packet copy outcome plus one per routing broadcast, in time order."""
    bits = res.bits
    rows = []
    for p in res.packets:
        if p.dummy:
            continue
        if res.config.mode == "dual":
            lab = str(oracle_select(p.throughput(Z, bits), p.throughput(L, bits)))
        else:
            lab = str(p.choice)
        for radio in (Z, L):
            c = p.copies.get(radio)
            if c is None:
                continue
            ev = "deliver" if c.delivered else "drop" if c.dropped else "in_flight"
            lat = p.latency(radio)
            rows.append((p.gen_time, 0, p.pid, int(radio),
                         [_f(p.gen_time), str(p.src), str(radio), ev, str(p.hops if radio == Z else 1),
                          _f(lat), _f(p.throughput(radio, bits)) if c.delivered else "0.0", lab]))
    for k, b in enumerate(res.broadcasts):
        rows.append((b.time, 1, k, 0, [_f(b.time), str(b.src), "zigbee", "route_update", "1", "", "", ""]))
    rows.sort(key=lambda r: r[:4])
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(r[4]) + "\n")
    return buf.getvalue()


def metrics_csv(metrics) -> str:
    lines = [",".join(METRIC_COLUMNS)]
    for m in metrics:
        lines.append(",".join(_f(v) for v in m.row()))
    return "\n".join(lines) + "\n"


def cdf_rows(name: str, tput):
    """Empirical CDF points ``(selector, tput_bps, probability_mass, cumulative)``."""
    vals, counts = np.unique(np.asarray(tput, dtype=float), return_counts=True)
    mass = counts / counts.sum()
    cum = np.cumsum(mass)
    cum[-1] = 1.0
    return [(name, float(v), float(m), float(c)) for v, m, c in zip(vals, mass, cum)]


__all__ = ["Metrics", "TRACE_COLUMNS", "METRIC_COLUMNS", "data_packets", "conservation", "paired_throughput",
           "summarize", "evaluate_selector", "overhead_fraction", "to_dataset", "trace_csv", "metrics_csv",
           "cdf_rows", "switch_penalty"]
