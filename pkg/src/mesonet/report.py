"""PNG figures for the report subcommand; each one mirrors a CSV written beside it."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LATENCY_TARGET_S = 0.055

plt.rcParams.update({
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "svg.hashsalt": "mesonet",
})


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def cdf_figure(tput: dict, path) -> None:
    fig, ax = plt.subplots()
    for name, tp in tput.items():
        v = np.sort(np.asarray(tp, dtype=float))
        ax.step(v, np.arange(1, len(v) + 1) / len(v), where="post", label=name)
    ax.set_xlabel("per-packet throughput (bps)")
    ax.set_ylabel("CDF")
    ax.legend()
    _save(fig, path)


def latency_figure(summary_rows, path) -> None:
    names = [r[0] for r in summary_rows]
    lat = [r[3] * 1e3 for r in summary_rows]
    fig, ax = plt.subplots()
    ax.bar(names, lat, color="0.6")
    ax.axhline(LATENCY_TARGET_S * 1e3, color="k", ls="--", lw=1, label="55 ms target")
    ax.set_ylabel("mean latency (ms)")
    ax.tick_params(axis="x", rotation=30)
    ax.legend()
    _save(fig, path)


def interval_figure(rows, path) -> None:
    by = defaultdict(list)
    for iv, name, _, ratio in rows:
        by[name].append((iv, ratio))
    fig, ax = plt.subplots()
    for name, pts in by.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=name)
    ax.invert_xaxis()
    ax.set_xlabel("packet interval (s)")
    ax.set_ylabel("throughput / Oracle")
    ax.legend()
    _save(fig, path)


def staleness_figure(curve, partial, path) -> None:
    fig, ax = plt.subplots()
    h = [r[0] for r in curve]
    ax.errorbar(h, [r[1] for r in curve], yerr=[r[2] for r in curve], marker="o", ms=3, capsize=2,
                label="full-path window after h hops")
    ax.plot([r[0] for r in partial], [r[1] for r in partial], marker="s", ms=3, label="first RP_n links")
    ax.set_xlabel("hops / RP_n")
    ax.set_ylabel("bit similarity to live window")
    ax.set_ylim(0.5, 1.02)
    ax.legend()
    _save(fig, path)


def rpn_figure(rows, chosen: int, path) -> None:
    fig, ax = plt.subplots()
    n = [r[0] for r in rows]
    ax.plot(n, [r[1] for r in rows], marker="o", ms=3, label="train")
    ax.plot(n, [r[2] for r in rows], marker="s", ms=3, label="test")
    ax.axvline(chosen, color="k", ls=":", lw=1, label=f"RP_n = {chosen}")
    ax.set_xlabel("links read from the source (n)")
    ax.set_ylabel("accuracy")
    ax.legend()
    _save(fig, path)


def training_curve_figure(rows, path) -> None:
    acc = defaultdict(lambda: defaultdict(list))
    for _, size, name, a in rows:
        acc[name][size].append(a)
    fig, ax = plt.subplots()
    for name, by in acc.items():
        s = sorted(by)
        m = np.array([np.mean(by[k]) for k in s])
        sd = np.array([np.std(by[k]) for k in s])
        ax.plot(s, m, marker="o", ms=3, label=name)
        ax.fill_between(s, m - sd, m + sd, alpha=0.2)
    ax.set_xlabel("training rows")
    ax.set_ylabel("held-out accuracy")
    ax.legend()
    _save(fig, path)


def gray_figure(rows, path) -> None:
    d = [r[1] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(d, [r[3] for r in rows], marker="o", ms=3, label="Zigbee")
    ax.plot(d, [r[4] for r in rows], marker="s", ms=3, label="LoRa")
    ax.axvspan(500, 1200, color="0.9", zorder=0)
    ax.set_xlabel("distance to gateway (m)")
    ax.set_ylabel("mean per-packet throughput (bps)")
    ax.legend()
    _save(fig, path)
