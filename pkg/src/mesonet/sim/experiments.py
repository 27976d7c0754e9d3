"""Experiment drivers built on the simulator: datasets, selector comparisons, sweeps.

Every driver is a pure function of its config and seed. Training traces use
``seed + TRAIN_SEED_OFFSET`` so evaluation traces never overlap them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channel import LinkChannel, draw_link_model
from ..dtree import (LabeledDataset, cart_trainer, kfold_accuracy, learning_curve, qlearning_trainer,
                     tao_trainer, train_tao_cart)
from ..pathquality import choose_rpn, partial_path_similarity, staleness_curve
from ..selectors import QLearningSelector, ThresholdTable, make_selector
from .config import ConfigError, SimConfig
from .engine import run
from .metrics import cdf_rows, data_packets, evaluate_selector, overhead_fraction, paired_throughput, to_dataset

log = logging.getLogger(__name__)

TRAIN_SEED_OFFSET = 1000
EVAL_SELECTORS = ("oracle", "fixed_zigbee", "fixed_lora", "threshold", "taocart")


@dataclass
class ExperimentConfig:
    replications: int = 10
    train_duration: float = 1500.0
    selectors: list = field(default_factory=lambda: list(EVAL_SELECTORS))
    intervals: list = field(default_factory=lambda: [5.0, 4.0, 3.0, 2.0, 1.5, 1.4, 1.3])
    cv_folds: int = 5
    rpn_gain_pp: float = 1.0
    rpn_max: int = 8
    rpn_duration: float = 1500.0
    staleness_hops: int = 10
    staleness_samples: int = 2000
    window: float = 30.0
    line_nodes: int = 15
    line_duration: float = 600.0
    curve_sizes: list = field(default_factory=lambda: [100, 250, 500, 1000, 1500])
    curve_seeds: int = 5

    def __post_init__(self):
        problems = []
        if self.replications < 1:
            problems.append("experiment.replications: must be >= 1")
        if self.train_duration <= 0:
            problems.append("experiment.train_duration: must be > 0")
        if any(i <= 0 for i in self.intervals):
            problems.append("experiment.intervals: must be positive")
        if self.cv_folds < 2:
            problems.append("experiment.cv_folds: must be >= 2")
        if self.rpn_duration <= 0:
            problems.append("experiment.rpn_duration: must be > 0")
        if self.rpn_max < 2:
            problems.append("experiment.rpn_max: must be >= 2")
        if problems:
            raise ConfigError(problems)


def _table(cfg: SimConfig):
    return ThresholdTable.from_rows(cfg.threshold_table) if cfg.threshold_table else ThresholdTable()


def gen_dataset(cfg: SimConfig, n: int | None = None):
    """Dual-transmission run turned into labeled rows: ``(dataset, excluded, result)``."""
    if cfg.mode != "dual":
        raise ConfigError(["mode: dataset generation needs dual transmission"])
    res = run(cfg)
    ds, excluded = to_dataset(res, n)
    log.info("dataset: %d rows, %d both-lost rows excluded", len(ds), excluded)
    return ds, excluded, res


def training_run(cfg: SimConfig, duration: float):
    return run(cfg.replace(seed=cfg.seed + TRAIN_SEED_OFFSET, duration=duration, mode="dual"))


def train_models(train_res, seed: int = 0, n: int | None = None):
    """TAO-CART tree and an offline-trained Q-learning table from one training trace."""
    ds, _ = to_dataset(train_res, n)
    tree = train_tao_cart(ds.X, ds.y)
    cfg = train_res.config
    ql = QLearningSelector(lr=cfg.ql_lr, epsilon=cfg.ql_epsilon, alpha=cfg.alpha)
    ql.train_offline(ds, np.random.default_rng([seed, 0x9E]))
    return tree, ql, ds


def evaluate_trace(res, names, tree=None, qlearning=None, table=None, seed: int = 0):
    """Metrics per selector plus per-packet throughput arrays on one dual trace."""
    packets = data_packets(res)
    out = {}
    for name in names:
        sel = make_selector(name, tree=tree, table=table, qlearning=qlearning)
        m, tput, lat, _ = evaluate_selector(res, sel, rng_seed=seed, packets=packets)
        out[name] = (m, tput, lat)
    return out


def _replicate(args):
    cfg, names, tree, ql, rep = args
    res = run(cfg.replace(seed=cfg.seed + rep, mode="dual"))
    ev = evaluate_trace(res, names, tree, ql, _table(cfg), seed=cfg.seed + rep)
    return {k: (m, t.tolist(), lat.tolist()) for k, (m, t, lat) in ev.items()}


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(a) for a in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


@dataclass
class Comparison:
    per_rep: list  # one dict name -> Metrics per replication
    tput: dict  # name -> pooled per-packet throughputs
    latency: dict  # name -> pooled per-packet latencies (nan when lost)
    tree: object = None
    overhead: float = 0.0

    def mean(self, name: str, attr: str = "mean_tput_bps") -> float:
        return float(np.mean([getattr(r[name], attr) for r in self.per_rep]))

    def pooled_latency(self, name: str) -> float:
        lat = np.asarray(self.latency[name])
        return float(np.nanmean(lat)) if np.isfinite(lat).any() else float("nan")

    def summary_rows(self):
        """``(selector, mean_tput_bps, std_tput_bps, mean_latency_s, plr, gain_vs_best_fixed)``."""
        best = max(self.mean("fixed_zigbee"), self.mean("fixed_lora")) if "fixed_zigbee" in self.tput \
            and "fixed_lora" in self.tput else float("nan")
        rows = []
        for name in self.tput:
            tp = [r[name].mean_tput_bps for r in self.per_rep]
            rows.append((name, float(np.mean(tp)), float(np.std(tp)), self.pooled_latency(name),
                         self.mean(name, "plr"), float(np.mean(tp)) / best if best == best else float("nan")))
        return rows


def compare_selectors(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig(), tree=None, qlearning=None,
                      jobs: int = 1) -> Comparison:
    """Train on a separate trace (unless a tree is given), then replay ``replications`` seeded traces."""
    names = list(exp.selectors)
    need_ql = "qlearning" in names and qlearning is None
    if ("taocart" in names and tree is None) or need_ql:
        t, q, _ = train_models(training_run(cfg, exp.train_duration), seed=cfg.seed)
        tree = tree if tree is not None else t
        qlearning = qlearning if qlearning is not None else q
    items = [(cfg, names, tree, qlearning, r) for r in range(exp.replications)]
    outs = _pool_map(_replicate, items, jobs)
    per_rep = [{k: v[0] for k, v in o.items()} for o in outs]
    tput = {k: np.concatenate([o[k][1] for o in outs]) for k in names}
    lat = {k: np.concatenate([o[k][2] for o in outs]) for k in names}
    return Comparison(per_rep, tput, lat, tree, per_rep[0][names[0]].overhead_fraction if per_rep else 0.0)


def comparison_cdf(comp: Comparison):
    rows = []
    for name, tp in comp.tput.items():
        rows += cdf_rows(name, tp)
    return rows


def interval_sweep(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig(), tree=None, qlearning=None,
                   jobs: int = 1):
    """Rows ``(interval, selector, mean_tput_bps, ratio_to_oracle)``; models trained once at the base interval."""
    names = list(dict.fromkeys(["oracle", *exp.selectors]))
    if "taocart" in names and tree is None or "qlearning" in names and qlearning is None:
        t, q, _ = train_models(training_run(cfg, exp.train_duration), seed=cfg.seed)
        tree = tree if tree is not None else t
        qlearning = qlearning if qlearning is not None else q
    items = [(cfg.replace(interval=float(iv)), names, tree, qlearning, 0) for iv in exp.intervals]
    outs = _pool_map(_replicate, items, jobs)
    rows = []
    for iv, o in zip(exp.intervals, outs):
        ref = o["oracle"][0].mean_tput_bps
        for name in names:
            tp = o[name][0].mean_tput_bps
            rows.append((float(iv), name, tp, tp / ref if ref > 0 else float("nan")))
    return rows


def rpn_study(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig(), trainer=None):
    """Accuracy versus the number of links read, and the knee-rule choice."""
    res = run(cfg.replace(mode="dual", duration=exp.rpn_duration))
    hops = [p.hops for p in data_packets(res) if p.hops > 0]
    if not hops or max(hops) < 2:
        raise ConfigError(["topology: RP_n study needs paths of at least two links"])
    top = min(exp.rpn_max, cfg.max_rpn, max(hops))
    datasets = {n: to_dataset(res, n)[0] for n in range(1, top + 1)}
    return choose_rpn(datasets, trainer or tao_trainer(), k=exp.cv_folds, seed=cfg.seed,
                      gain_pp=exp.rpn_gain_pp)


def staleness_study(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig()):
    """Traditional staleness curve and the DT-based partial similarity for each RP_n."""
    calib = cfg.calibration

    def factory(rng):
        return LinkChannel(draw_link_model(calib, rng), rng, phase=float(rng.uniform(0, calib.beacon_period)))

    rng = np.random.default_rng([cfg.seed, 0x57A1])
    curve = staleness_curve(factory, exp.staleness_hops, exp.staleness_samples, rng,
                            per_hop_delay=cfg.per_hop_delay, alpha=cfg.alpha)
    dt = [(n, partial_path_similarity(curve, n)) for n in range(1, exp.staleness_hops + 2)]
    return curve, dt


def line_config(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig()) -> SimConfig:
    """Evenly spaced transect with every node sending.

    Location shadowing is switched off so throughput versus distance is not
    dominated by one unlucky static draw per node.
    """
    return cfg.replace(topology={"generator": "line", "n": exp.line_nodes, "spacing": 100.0},
                       sources="all", duration=exp.line_duration, mode="dual",
                       channel={**cfg.channel, "shadowing_sigma": 0.0})


@dataclass
class GrayRegion:
    rows: list  # (node, distance, hn, zigbee_tput, lora_tput, zigbee_win_frac, lora_win_frac)
    crossover: float | None
    band: tuple | None  # distances where both radios win >= min_share of windows


def gray_region(res, window: float = 30.0, min_share: float = 0.2) -> GrayRegion:
    """Per-node mean throughputs and how often each radio wins a time window."""
    packets = data_packets(res)
    tz, tl, _, _ = paired_throughput(res, packets)
    src = np.array([p.src for p in packets])
    t = np.array([p.gen_time for p in packets])
    first = {}
    for p in packets:
        first.setdefault(p.src, p)
    rows = []
    for node in sorted(first, key=lambda v: first[v].distance):
        k = src == node
        p0 = first[node]
        w = np.floor(t[k] / window).astype(int)
        wins_z = wins_l = 0
        ids = np.unique(w)
        for wi in ids:
            s = w == wi
            a, b = tz[k][s].mean(), tl[k][s].mean()
            wins_z += a >= b
            wins_l += b > a
        n = max(len(ids), 1)
        rows.append((int(node), float(p0.distance), int(p0.hops), float(tz[k].mean()), float(tl[k].mean()),
                     float(wins_z / n), float(wins_l / n)))
    crossover = next((r[1] for r in rows if r[4] > r[3]), None)
    both = [r[1] for r in rows if r[5] >= min_share and r[6] >= min_share]
    return GrayRegion(rows, crossover, (min(both), max(both)) if both else None)


def training_curve(cfg: SimConfig, exp: ExperimentConfig = ExperimentConfig(), ds: LabeledDataset | None = None):
    """Rows ``(seed, size, trainer, test_accuracy)`` for TAO-CART, CART and Q-learning."""
    if ds is None:
        ds, _ = to_dataset(training_run(cfg, exp.train_duration))
    pool = int(len(ds) * 0.8)
    sizes = [s for s in exp.curve_sizes if s <= pool]
    if len(sizes) < len(exp.curve_sizes):
        log.warning("training curve truncated to %d rows of training data", pool)
    trainers = {"taocart": tao_trainer(), "cart": cart_trainer(),
                "qlearning": qlearning_trainer(lr=cfg.ql_lr, epsilon=cfg.ql_epsilon, alpha=cfg.alpha)}
    rows = []
    for s in range(exp.curve_seeds):
        for size, name, acc in learning_curve(ds, sizes, trainers, seed=cfg.seed + s):
            rows.append((cfg.seed + s, size, name, acc))
    return rows


def cv_compare(ds: LabeledDataset, k: int = 5, seeds=range(5)):
    """Per-seed ``(seed, cart_test, tao_test)`` on identical folds."""
    out = []
    for s in seeds:
        c = kfold_accuracy(ds, k=k, trainer=cart_trainer(), seed=s)
        t = kfold_accuracy(ds, k=k, trainer=tao_trainer(), seed=s)
        out.append((s, c.test_mean, t.test_mean))
    return out


def overhead_by_period(cfg: SimConfig, periods=(5.0, 10.0)):
    """Routing-broadcast overhead fraction for each route-update period."""
    return [(p, overhead_fraction(run(cfg.replace(route_update_period=p)))) for p in periods]


__all__ = ["ExperimentConfig", "Comparison", "GrayRegion", "TRAIN_SEED_OFFSET", "gen_dataset", "training_run",
           "train_models", "evaluate_trace", "compare_selectors", "comparison_cdf", "interval_sweep", "rpn_study",
           "staleness_study", "line_config", "gray_region", "training_curve", "cv_compare", "overhead_by_period"]
