"""Command-line front end: ``mesonet <subcommand> [--config FILE] [--seed N] [--out DIR]``.

Every run writes ``manifest.json`` into its output directory before any
result file. Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analytic import AnalyticError, aloha_throughput, csma_flow_throughput, gray_region_sweep, parse_graph_file
from .dtree import (TreeError, cart_trainer, codegen, deserialize, from_csv, kfold_accuracy, prune_dead,
                    serialize, tao_trainer, to_csv, train_cart, train_error, tao_optimize)
from .selectors import SELECTOR_NAMES, QLearningSelector
from .sim import ConfigError, SimConfig, from_mapping, metrics_csv, trace_csv
from .sim import experiments as ex
from .sim.metrics import METRIC_COLUMNS
from .topology import build_topology

log = logging.getLogger("mesonet")

USAGE, RUNTIME = 2, 1


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config

def load_config(path: str | None, seed: int | None = None):
    """``(SimConfig, ExperimentConfig, raw mapping)`` from a YAML file plus seed overrides."""
    raw = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise UsageError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError(f"{path}: top level must be a mapping")
    raw = dict(raw)
    exp_raw = raw.pop("experiment", None) or {}
    if not isinstance(exp_raw, dict):
        raise ConfigError(["experiment: must be a mapping"])
    env = os.environ.get("MESONET_SEED")
    if env is not None:
        try:
            raw["seed"] = int(env)
        except ValueError:
            raise UsageError(f"MESONET_SEED must be an integer (got {env!r})") from None
    if seed is not None:
        raw["seed"] = seed
    known = set(ex.ExperimentConfig.__dataclass_fields__)
    problems = [f"experiment.{k}: unknown config key" for k in sorted(exp_raw) if k not in known]
    try:
        cfg = from_mapping(raw)
    except ConfigError as exc:
        problems = exc.problems + problems
    if problems:
        raise ConfigError(problems)
    exp = ex.ExperimentConfig(**exp_raw)
    return cfg, exp, {**raw, "experiment": exp_raw}


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def prepare_out(out: str, force: bool) -> Path:
    d = Path(out)
    if d.exists() and any(d.iterdir()) and not force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_manifest(d: Path, args, cfg: SimConfig, raw: dict) -> None:
    man = {
        "subcommand": args.cmd,
        "config": args.config,
        "seed": cfg.seed,
        "out": str(d),
        "version": __version__,
        "config_hash": config_hash(raw),
        "sim_digest": cfg.digest(),
    }
    (d / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    path.write_text("\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if v != v else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


# ------------------------------------------------------------------ subcommands

def cmd_analytic(args, cfg, exp, d: Path) -> int:
    p = Path(args.graph)
    if not p.is_file():
        raise UsageError(f"graph file not found: {args.graph}")
    try:
        graph, loads = parse_graph_file(p.read_text())
    except AnalyticError as exc:
        raise UsageError(f"{args.graph}: {exc}") from None
    if graph is not None:
        sol = csma_flow_throughput(graph)
        rows = [(i, j, sol.g[(i, j)], sol.s[(i, j)]) for i, j in sorted(sol.s)]
        write_csv(d / "flows.csv", ("flow_src", "flow_dst", "g", "s"), rows)
        for r in rows:
            print(f"flow {r[0]}->{r[1]}: g={r[2]:.6g} s={r[3]:.6g}")
    if loads:
        rows = [(G, aloha_throughput(G)) for G in loads]
        write_csv(d / "aloha.csv", ("G", "S"), rows)
        for G, S in rows:
            print(f"aloha G={G:.6g} S={S:.6g}")
    return 0


def cmd_gen_dataset(args, cfg, exp, d: Path) -> int:
    ds, excluded, res = ex.gen_dataset(cfg.replace(mode="dual"))
    if len(ds) < 1500:
        log.warning("only %d rows; the training budget is 1500 (raise duration)", len(ds))
    (d / "dataset.csv").write_text(to_csv(ds))
    if args.trace:
        (d / "trace.csv").write_text(trace_csv(res))
    print(f"rows={len(ds)} excluded_both_lost={excluded} lora_fraction={ds.lora_fraction():.3f}")
    return 0


def _read_dataset(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"dataset not found: {path}")
    try:
        ds = from_csv(p.read_text())
    except (ValueError, TreeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if len(ds) == 0:
        raise UsageError(f"{path}: no rows")
    return ds


def cmd_train(args, cfg, exp, d: Path) -> int:
    ds = _read_dataset(args.dataset)
    if ds.y.min() == ds.y.max():
        log.warning("single-class dataset; the model is one leaf")
    cart = train_cart(ds.X, ds.y)
    tree = cart
    if args.method == "tao":
        tree = tao_optimize(cart, ds.X, ds.y)
        print(f"train errors: cart={train_error(cart, ds.X, ds.y)} tao={train_error(tree, ds.X, ds.y)}")
    tree = prune_dead(tree, ds.X)
    (d / "tree.txt").write_text(serialize(tree))
    (d / "tree.c").write_text(codegen(tree))
    rows = []
    if len(ds) >= exp.cv_folds:
        trainer = tao_trainer() if args.method == "tao" else cart_trainer()
        cv = kfold_accuracy(ds, k=exp.cv_folds, trainer=trainer, seed=cfg.seed)
        rows = [(f, a, b) for f, (a, b) in enumerate(zip(cv.train, cv.test))]
        rows += [("mean", cv.train_mean, cv.test_mean), ("std", cv.train_std, cv.test_std)]
        print(f"{args.method} {exp.cv_folds}-fold accuracy: train {cv.train_mean:.4f}±{cv.train_std:.4f} "
              f"test {cv.test_mean:.4f}±{cv.test_std:.4f}")
    write_csv(d / "cv.csv", ("fold", "train_accuracy", "test_accuracy"), rows)
    return 0


def _load_tree(path: str | None):
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"model file not found: {path}")
    try:
        return deserialize(p.read_text())
    except TreeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _selectors(args, exp):
    names = [s.strip() for s in args.selectors.split(",")] if args.selectors else list(exp.selectors)
    bad = [s for s in names if s not in SELECTOR_NAMES]
    if bad:
        raise UsageError(f"unknown selector(s): {', '.join(bad)}")
    return names


def _qlearning(args, cfg):
    if not getattr(args, "dataset", None):
        return None
    ds = _read_dataset(args.dataset)
    ql = QLearningSelector(lr=cfg.ql_lr, epsilon=cfg.ql_epsilon, alpha=cfg.alpha)
    return ql.train_offline(ds, np.random.default_rng([cfg.seed, 0x9E]))


COMPARE_HEADER = ("selector", "mean_tput_bps", "std_tput_bps", "mean_latency_s", "plr", "gain_vs_best_fixed")
REP_HEADER = ("replication",) + METRIC_COLUMNS


def _write_comparison(d: Path, comp) -> None:
    write_csv(d / "metrics.csv", COMPARE_HEADER, comp.summary_rows())
    lines = [",".join(REP_HEADER)]
    for r, reps in enumerate(comp.per_rep):
        body = metrics_csv(reps.values()).splitlines()[1:]
        lines += [f"{r},{b}" for b in body]
    (d / "replications.csv").write_text("\n".join(lines) + "\n")
    write_csv(d / "cdf.csv", ("selector", "tput_bps", "probability_mass", "cumulative"), ex.comparison_cdf(comp))
    lat_rows = []
    for name, lat in comp.latency.items():
        lat = np.asarray(lat)
        ok = lat[np.isfinite(lat)]
        q = np.percentile(ok, [50, 90]) if len(ok) else [float("nan")] * 2
        lat_rows.append((name, float(ok.mean()) if len(ok) else float("nan"), float(q[0]), float(q[1]),
                         int(len(ok)), int(len(lat) - len(ok))))
    write_csv(d / "latency.csv", ("selector", "mean_s", "p50_s", "p90_s", "delivered", "lost"), lat_rows)


def cmd_eval(args, cfg, exp, d: Path) -> int:
    names = _selectors(args, exp)
    tree = _load_tree(args.tree or cfg.tree_file)
    if "taocart" in names and tree is None:
        raise UsageError("taocart needs a model file (--tree or tree_file in the config)")
    exp.selectors = names
    comp = ex.compare_selectors(cfg, exp, tree=tree, qlearning=_qlearning(args, cfg), jobs=args.jobs)
    _write_comparison(d, comp)
    for row in comp.summary_rows():
        print(f"{row[0]:>13s} tput={row[1]:8.1f} bps latency={row[3] * 1e3:6.2f} ms plr={row[4]:.3f} "
              f"gain={row[5]:.3f}")
    return 0


def cmd_rpn(args, cfg, exp, d: Path) -> int:
    sel = ex.rpn_study(cfg, exp)
    rows = [(n, a, b) for n, (a, b) in sorted(sel.accuracy_by_n.items())]
    write_csv(d / "rpn.csv", ("n", "train_accuracy", "test_accuracy"), rows)
    for n, a, b in rows:
        print(f"n={n} train={a:.4f} test={b:.4f}")
    print(f"RP_n={sel.rpn} (gain threshold {sel.gain_pp} pp)")
    return 0


def cmd_sweep(args, cfg, exp, d: Path) -> int:
    tree = _load_tree(args.tree or cfg.tree_file)
    if args.selectors:
        exp.selectors = _selectors(args, exp)
    rows = ex.interval_sweep(cfg, exp, tree=tree, jobs=args.jobs)
    write_csv(d / "interval_sweep.csv", ("interval_s", "selector", "mean_tput_bps", "ratio_to_oracle"), rows)
    for r in rows:
        print(f"interval={r[0]:.2f} {r[1]:>13s} ratio={r[3]:.4f}")
    return 0


def cmd_gray(args, cfg, exp, d: Path) -> int:
    lc = ex.line_config(cfg, exp)
    topo = build_topology(lc.topology)
    cal = lc.calibration
    an = gray_region_sweep(topo, cal.zigbee_airtime, cal.lora_airtime, hop_overhead=lc.zigbee_hop_overhead)
    write_csv(d / "gray_analytic.csv", ("distance_m", "hn", "zigbee_bps", "lora_bps"), an.rows)
    from .sim import run
    gr = ex.gray_region(run(lc), window=exp.window)
    write_csv(d / "gray_sim.csv", ("node", "distance_m", "hn", "zigbee_bps", "lora_bps", "zigbee_win_share",
                                   "lora_win_share"), gr.rows)
    print(f"analytic crossover={an.crossover} m; simulated crossover={gr.crossover} m; "
          f"alternating band={gr.band}")
    return 0


def cmd_staleness(args, cfg, exp, d: Path) -> int:
    curve, dt = ex.staleness_study(cfg, exp)
    write_csv(d / "staleness.csv", ("hop", "mean_similarity", "stderr"), curve)
    write_csv(d / "partial.csv", ("rpn", "mean_similarity"), dt)
    for h, m, se in curve:
        print(f"hop {h}: {m:.4f} ± {se:.4f}")
    return 0


def cmd_curve(args, cfg, exp, d: Path) -> int:
    ds = _read_dataset(args.dataset) if args.dataset else None
    rows = ex.training_curve(cfg, exp, ds)
    write_csv(d / "training_curve.csv", ("seed", "size", "trainer", "test_accuracy"), rows)
    return 0


def cmd_report(args, cfg, exp, d: Path) -> int:
    """Full pipeline: every experiment's CSV plus a PNG figure beside it."""
    from . import report

    train_res = ex.training_run(cfg, exp.train_duration)
    tree, ql, ds = ex.train_models(train_res, seed=cfg.seed)
    (d / "dataset.csv").write_text(to_csv(ds))
    (d / "tree.txt").write_text(serialize(tree))
    (d / "tree.c").write_text(codegen(tree))
    exp.selectors = list(dict.fromkeys([*exp.selectors, "qlearning"]))
    comp = ex.compare_selectors(cfg, exp, tree=tree, qlearning=ql, jobs=args.jobs)
    _write_comparison(d, comp)
    report.cdf_figure(comp.tput, d / "cdf.png")
    report.latency_figure(comp.summary_rows(), d / "latency.png")

    sweep = ex.interval_sweep(cfg, exp, tree=tree, qlearning=ql, jobs=args.jobs)
    write_csv(d / "interval_sweep.csv", ("interval_s", "selector", "mean_tput_bps", "ratio_to_oracle"), sweep)
    report.interval_figure(sweep, d / "interval_sweep.png")

    curve, dt = ex.staleness_study(cfg, exp)
    write_csv(d / "staleness.csv", ("hop", "mean_similarity", "stderr"), curve)
    write_csv(d / "partial.csv", ("rpn", "mean_similarity"), dt)
    report.staleness_figure(curve, dt, d / "staleness.png")

    sel = ex.rpn_study(cfg, exp)
    rows = [(n, a, b) for n, (a, b) in sorted(sel.accuracy_by_n.items())]
    write_csv(d / "rpn.csv", ("n", "train_accuracy", "test_accuracy"), rows)
    report.rpn_figure(rows, sel.rpn, d / "rpn.png")

    tc = ex.training_curve(cfg, exp, ds)
    write_csv(d / "training_curve.csv", ("seed", "size", "trainer", "test_accuracy"), tc)
    report.training_curve_figure(tc, d / "training_curve.png")

    cmd_gray(args, cfg, exp, d)
    gr_rows = [tuple(r) for r in _read_rows(d / "gray_sim.csv")]
    report.gray_figure(gr_rows, d / "gray_region.png")
    print(f"report written to {d} (RP_n={sel.rpn}, taocart gain={comp.mean('taocart') / max(comp.mean('fixed_zigbee'), comp.mean('fixed_lora')):.3f}, "
          f"taocart latency={np.nanmean(comp.latency['taocart']) * 1e3:.2f} ms)")
    return 0


def _read_rows(path: Path):
    lines = path.read_text().splitlines()[1:]
    return [[float(v) for v in line.split(",")] for line in lines if line]


# ------------------------------------------------------------------ parser

COMMANDS = {
    "analytic": cmd_analytic, "gen-dataset": cmd_gen_dataset, "train": cmd_train, "eval": cmd_eval,
    "rpn": cmd_rpn, "sweep": cmd_sweep, "gray": cmd_gray, "staleness": cmd_staleness, "curve": cmd_curve,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config (simulation keys plus an optional experiment section)")
    common.add_argument("--seed", type=int, help="overrides the config seed and MESONET_SEED")
    common.add_argument("--out", help="output directory (default runs/<subcommand>)")
    common.add_argument("--force", action="store_true", help="reuse a non-empty output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for replications")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mesonet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)
    a = sub.add_parser("analytic", parents=[common], help="CSMA product-form / ALOHA throughput of a graph file")
    a.add_argument("graph")
    g = sub.add_parser("gen-dataset", parents=[common], help="dual-transmission labeled dataset")
    g.add_argument("--trace", action="store_true", help="also write the packet trace CSV")
    t = sub.add_parser("train", parents=[common], help="train a CART or TAO-CART tree")
    t.add_argument("dataset")
    t.add_argument("--method", choices=("cart", "tao"), default="tao")
    e = sub.add_parser("eval", parents=[common], help="compare selectors on replicated traces")
    e.add_argument("--tree")
    e.add_argument("--selectors", help="comma-separated; default from the experiment section")
    e.add_argument("--dataset", help="training rows for the Q-learning selector")
    sub.add_parser("rpn", parents=[common], help="accuracy versus links read (RP_n knee)")
    s = sub.add_parser("sweep", parents=[common], help="packet-interval sweep, ratio to Oracle")
    s.add_argument("--tree")
    s.add_argument("--selectors")
    sub.add_parser("gray", parents=[common], help="gray-region crossover on the line topology")
    sub.add_parser("staleness", parents=[common], help="path-quality staleness curves")
    c = sub.add_parser("curve", parents=[common], help="accuracy versus training rows, trees and Q-learning")
    c.add_argument("--dataset")
    sub.add_parser("report", parents=[common], help="every experiment with figures")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg, exp, raw = load_config(args.config, args.seed)
        d = prepare_out(args.out or os.path.join("runs", args.cmd), args.force)
        write_manifest(d, args, cfg, raw)
        return COMMANDS[args.cmd](args, cfg, exp, d)
    except (UsageError, ConfigError) as exc:
        print(f"mesonet {args.cmd}: error: {exc}", file=sys.stderr)
        return USAGE
    except (AnalyticError, TreeError, ValueError, OSError) as exc:
        print(f"mesonet {args.cmd}: failed: {exc}", file=sys.stderr)
        return RUNTIME


if __name__ == "__main__":
    sys.exit(main())
