"""CART induction and TAO refinement for axis-aligned classification trees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import DecisionTree, TreeError


@dataclass(frozen=True)
class CartConfig:
    max_depth: int = 8
    min_leaf: int = 5


@dataclass(frozen=True)
class TaoConfig:
    max_passes: int = 20
    check_monotone: bool = True


def _majority(y: np.ndarray, default: int = 0) -> int:
    if len(y) == 0:
        return default
    ones = int(y.sum())
    zeros = len(y) - ones
    if ones == zeros:
        return default
    return int(ones > zeros)


def _prep(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=np.int8).ravel()
    if len(X) == 0:
        raise TreeError("empty dataset")
    if len(X) != len(y):
        raise TreeError("X and y lengths differ")
    if not np.all(np.isfinite(X)):
        raise TreeError("non-finite feature value")
    return X, y


def _midpoint(lo: float, hi: float) -> float:
    """Threshold strictly separating ``lo`` from ``hi`` under ``x <= thr``."""
    m = (lo + hi) / 2.0
    return m if lo <= m < hi else lo


def best_gini_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted Gini split as ``(score, feature, threshold)`` or None.

    The score is ``n_L*gini_L + n_R*gini_R``. Ties keep the lowest feature
    index, then the lowest threshold.
    """
    n = len(y)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        v = X[order, f]
        ys = y[order].astype(np.int64)
        # candidate cut after position i (left = first i+1 rows)
        i = np.flatnonzero(v[1:] != v[:-1])
        if len(i) == 0:
            continue
        nl = i + 1
        ok = (nl >= min_leaf) & (n - nl >= min_leaf)
        i, nl = i[ok], nl[ok]
        if len(i) == 0:
            continue
        c1 = np.cumsum(ys)[i]
        c0 = nl - c1
        t1 = ys.sum()
        r1 = t1 - c1
        r0 = (n - nl) - r1
        nr = n - nl
        score = nl - (c0 * c0 + c1 * c1) / nl + nr - (r0 * r0 + r1 * r1) / nr
        j = int(np.argmin(score))
        if best is None or score[j] < best[0]:
            best = (float(score[j]), f, _midpoint(float(v[i[j]]), float(v[i[j] + 1])))
    return best


def train_cart(X, y, config: CartConfig = CartConfig()) -> DecisionTree:
    X, y = _prep(X, y)
    tree = DecisionTree(max_depth=config.max_depth, n_features=X.shape[1])
    tree.set_leaf(0, _majority(y))
    if len(y) < 2 * config.min_leaf or y.min() == y.max():
        return tree

    stack = [(0, np.arange(len(y)), 0)]
    while stack:
        k, idx, depth = stack.pop()
        yy = y[idx]
        tree.set_leaf(k, _majority(yy))
        if depth >= config.max_depth or len(idx) < 2 * config.min_leaf or yy.min() == yy.max():
            continue
        found = best_gini_split(X[idx], yy, config.min_leaf)
        if found is None:
            continue
        score, f, thr = found
        ones = int(yy.sum())
        parent = len(yy) - (ones * ones + (len(yy) - ones) ** 2) / len(yy)
        if not score < parent:
            continue
        lk, rk = tree.add_node(), tree.add_node()
        tree.set_split(k, f, thr, lk, rk)
        go = X[idx, f] <= thr
        stack.append((rk, idx[~go], depth + 1))
        stack.append((lk, idx[go], depth + 1))
    return tree


def best_care_split(X: np.ndarray, care_left: np.ndarray, care_right: np.ndarray):
    """Axis-aligned split minimizing misrouted care points.

    ``care_left``/``care_right`` flag points that must go left/right (a point
    is in at most one). Candidate thresholds are midpoints between consecutive
    unique values of all points in ``X``. Returns ``(errors, feature, threshold)``
    or None when every feature is constant.
    """
    cl = care_left.astype(np.int64)
    cr = care_right.astype(np.int64)
    total_l = int(cl.sum())
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        v = X[order, f]
        i = np.flatnonzero(v[1:] != v[:-1])
        if len(i) == 0:
            continue
        # errors = right-targets sent left + left-targets sent right
        err = np.cumsum(cr[order])[i] + (total_l - np.cumsum(cl[order])[i])
        j = int(np.argmin(err))
        if best is None or err[j] < best[0]:
            best = (int(err[j]), f, _midpoint(float(v[i[j]]), float(v[i[j] + 1])))
    return best


def _reach(tree: DecisionTree, X: np.ndarray) -> dict[int, np.ndarray]:
    """Row indices reaching every node."""
    out = {0: np.arange(len(X))}
    stack = [0]
    while stack:
        k = stack.pop()
        if tree.is_leaf(k):
            continue
        idx = out[k]
        go = X[idx, tree.feature[k]] <= tree.threshold[k]
        out[tree.left[k]] = idx[go]
        out[tree.right[k]] = idx[~go]
        stack += [tree.left[k], tree.right[k]]
    return out


def tao_optimize(tree: DecisionTree, X, y, config: TaoConfig = TaoConfig()) -> DecisionTree:
    """Refine a fixed-structure tree one depth level at a time, deepest first.

    Nodes at one depth reach disjoint points, so each node is re-fit in turn
    against pseudo-labels while the rest of the tree is held fixed. Every
    accepted change strictly lowers the training error.
    """
    X, y = _prep(X, y)
    if X.shape[1] != tree.n_features:
        raise TreeError(f"feature arity {X.shape[1]} != tree arity {tree.n_features}")
    t = tree.copy()
    errors = int((t.predict(X) != y).sum())
    for _ in range(config.max_passes):
        changed = False
        depths = t.depth_of()
        for d in range(max(depths.values()), -1, -1):
            for k in sorted(n for n, dd in depths.items() if dd == d):
                idx = _reach(t, X)[k]
                if len(idx) == 0:
                    continue
                yy = y[idx]
                if t.is_leaf(k):
                    new = _majority(yy, default=t.value[k])
                    if new != t.value[k] and (yy == new).sum() > (yy == t.value[k]).sum():
                        t.value[k] = new
                        changed = True
                    else:
                        continue
                else:
                    Xn = X[idx]
                    ok_l = t.predict(Xn, start=t.left[k]) == yy
                    ok_r = t.predict(Xn, start=t.right[k]) == yy
                    care_l = ok_l & ~ok_r
                    care_r = ok_r & ~ok_l
                    go = Xn[:, t.feature[k]] <= t.threshold[k]
                    cur = int((care_r & go).sum() + (care_l & ~go).sum())
                    found = best_care_split(Xn, care_l, care_r)
                    if found is None or not found[0] < cur:
                        continue
                    _, f, thr = found
                    t.feature[k], t.threshold[k] = f, thr
                    changed = True
                if config.check_monotone:
                    now = int((t.predict(X) != y).sum())
                    assert now <= errors, f"TAO increased training error {errors} -> {now} at node {k}"
                    errors = now
        if not changed:
            break
    return t


def train_error(tree: DecisionTree, X, y) -> int:
    X, y = _prep(X, y)
    return int((tree.predict(X) != y).sum())


def train_tao_cart(X, y, cart: CartConfig = CartConfig(), tao: TaoConfig = TaoConfig()) -> DecisionTree:
    return tao_optimize(train_cart(X, y, cart), X, y, tao)
