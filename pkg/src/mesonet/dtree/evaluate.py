"""Cross-validation and learning curves for radio-selection classifiers.

A trainer is any callable ``trainer(ds, rng) -> predict`` where ``predict``
maps a feature matrix to 0/1 labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .train import CartConfig, TaoConfig, train_cart, tao_optimize
from .tree import TreeError


def cart_trainer(cfg: CartConfig = CartConfig()):
    def fit(ds, rng=None):
        return train_cart(ds.X, ds.y, cfg).predict
    return fit


def tao_trainer(cfg: CartConfig = CartConfig(), tao: TaoConfig = TaoConfig()):
    def fit(ds, rng=None):
        return tao_optimize(train_cart(ds.X, ds.y, cfg), ds.X, ds.y, tao).predict
    return fit


def qlearning_trainer(**kw):
    from ..selectors import QLearningSelector

    def fit(ds, rng):
        sel = QLearningSelector(**kw)
        sel.train_offline(ds, rng)
        return sel.predict
    return fit


def trainer_by_name(name: str):
    table = {"cart": cart_trainer, "tao": tao_trainer, "taocart": tao_trainer, "qlearning": qlearning_trainer}
    if name not in table:
        raise TreeError(f"unknown trainer {name!r}")
    return table[name]()


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


@dataclass
class CVResult:
    train: list[float] = field(default_factory=list)
    test: list[float] = field(default_factory=list)

    @property
    def train_mean(self):
        return float(np.mean(self.train))

    @property
    def train_std(self):
        return float(np.std(self.train))

    @property
    def test_mean(self):
        return float(np.mean(self.test))

    @property
    def test_std(self):
        return float(np.std(self.test))


def kfold_accuracy(ds: LabeledDataset, k: int = 5, trainer=None, seed: int = 0) -> CVResult:
    if k < 2:
        raise TreeError("k must be >= 2")
    if k > len(ds):
        raise TreeError(f"k={k} exceeds {len(ds)} rows")
    trainer = trainer or tao_trainer()
    rng = np.random.default_rng(seed)
    fold = stratified_folds(ds.y, k, rng)
    res = CVResult()
    for f in range(k):
        tr, te = np.flatnonzero(fold != f), np.flatnonzero(fold == f)
        if len(te) == 0:
            continue
        train_ds = ds.subset(tr)
        pred = trainer(train_ds, np.random.default_rng([seed, f]))
        res.train.append(float((pred(train_ds.X) == train_ds.y).mean()))
        res.test.append(float((pred(ds.X[te]) == ds.y[te]).mean()))
    return res


def learning_curve(ds: LabeledDataset, sizes, trainers: dict, seed: int = 0, holdout: float = 0.2):
    """Rows ``(size, trainer_name, test_accuracy)``; trained on a prefix, tested on a fixed holdout."""
    sizes = list(sizes)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ds))
    n_test = max(1, int(round(holdout * len(ds))))
    test, pool = perm[:n_test], perm[n_test:]
    for s in sizes:
        if s <= 0:
            raise TreeError("learning-curve size must be positive")
        if s > len(pool):
            raise TreeError(f"size {s} exceeds {len(pool)} training rows")
    test_ds = ds.subset(test)
    rows = []
    for s in sizes:
        train_ds = ds.subset(pool[:s])
        for name, trainer in trainers.items():
            pred = trainer(train_ds, np.random.default_rng([seed, s]))
            rows.append((s, name, float((pred(test_ds.X) == test_ds.y).mean())))
    return rows
