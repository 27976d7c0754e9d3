"""Axis-aligned binary classification tree over the four radio-selection features."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

FEATURES = ("hn", "lora_rssi", "zigbee_prr", "zigbee_rnp")
LEAF = -1


class RadioChoice(enum.IntEnum):
    ZIGBEE = 0
    LORA = 1

    @classmethod
    def parse(cls, s) -> "RadioChoice":
        if isinstance(s, (int, np.integer)):
            return cls(int(s))
        return {"zigbee": cls.ZIGBEE, "lora": cls.LORA, "0": cls.ZIGBEE, "1": cls.LORA}[str(s).strip().lower()]

    def __str__(self):
        return self.name.lower() if self is RadioChoice.ZIGBEE else "lora"


class TreeError(ValueError):
    pass


@dataclass
class DecisionTree:
    """Flat node arrays; node 0 is the root.

    Internal nodes route a point left iff ``x[feature] <= threshold``.
    Leaves carry ``feature == LEAF`` and a label in ``value``.
    """

    feature: list[int] = field(default_factory=lambda: [LEAF])
    threshold: list[float] = field(default_factory=lambda: [0.0])
    left: list[int] = field(default_factory=lambda: [-1])
    right: list[int] = field(default_factory=lambda: [-1])
    value: list[int] = field(default_factory=lambda: [0])
    max_depth: int = 8
    n_features: int = len(FEATURES)

    @classmethod
    def leaf(cls, label: int, **kw) -> "DecisionTree":
        return cls(value=[int(label)], **kw)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, k: int) -> bool:
        return self.feature[k] == LEAF

    def add_node(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0)
        return self.n_nodes - 1

    def set_split(self, k: int, feat: int, thr: float, left: int, right: int) -> None:
        self.feature[k], self.threshold[k], self.left[k], self.right[k] = int(feat), float(thr), left, right

    def set_leaf(self, k: int, label: int) -> None:
        self.feature[k], self.threshold[k], self.left[k], self.right[k] = LEAF, 0.0, -1, -1
        self.value[k] = int(label)

    def depth_of(self) -> dict[int, int]:
        out, stack = {}, [(0, 0)]
        while stack:
            k, d = stack.pop()
            out[k] = d
            if not self.is_leaf(k):
                stack.append((self.left[k], d + 1))
                stack.append((self.right[k], d + 1))
        return out

    def depth(self) -> int:
        return max(self.depth_of().values())

    def reachable(self) -> list[int]:
        return sorted(self.depth_of())

    def validate(self) -> None:
        seen = set()
        stack = [0]
        while stack:
            k = stack.pop()
            if k in seen or not (0 <= k < self.n_nodes):
                raise TreeError(f"node {k} revisited or out of range")
            seen.add(k)
            if not self.is_leaf(k):
                if not (0 <= self.feature[k] < self.n_features):
                    raise TreeError(f"node {k} has bad feature {self.feature[k]}")
                if not np.isfinite(self.threshold[k]):
                    raise TreeError(f"node {k} has a non-finite threshold")
                stack += [self.left[k], self.right[k]]

    def copy(self) -> "DecisionTree":
        return DecisionTree(list(self.feature), list(self.threshold), list(self.left), list(self.right),
                            list(self.value), self.max_depth, self.n_features)

    def apply(self, X: np.ndarray, start: int = 0) -> np.ndarray:
        """Leaf index reached by every row of ``X`` starting from node ``start``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        lt = np.asarray(self.left)
        rt = np.asarray(self.right)
        node = np.full(len(X), start, dtype=np.int64)
        rows = np.arange(len(X))
        active = feat[node] != LEAF
        while active.any():
            a = rows[active]
            n = node[a]
            go_left = X[a, feat[n]] <= thr[n]
            node[a] = np.where(go_left, lt[n], rt[n])
            active[a] = feat[node[a]] != LEAF
        return node

    def predict(self, X: np.ndarray, start: int = 0) -> np.ndarray:
        return np.asarray(self.value, dtype=np.int8)[self.apply(X, start)]

    def predict_one(self, x) -> RadioChoice:
        k = 0
        while self.feature[k] != LEAF:
            k = self.left[k] if x[self.feature[k]] <= self.threshold[k] else self.right[k]
        return RadioChoice(self.value[k])

    def compact(self) -> "DecisionTree":
        """Renumber reachable nodes in preorder and drop orphans."""
        out = DecisionTree(feature=[], threshold=[], left=[], right=[], value=[],
                           max_depth=self.max_depth, n_features=self.n_features)

        def walk(k):
            nk = out.add_node()
            if self.is_leaf(k):
                out.set_leaf(nk, self.value[k])
            else:
                lft = walk(self.left[k])
                rgt = walk(self.right[k])
                out.set_split(nk, self.feature[k], self.threshold[k], lft, rgt)
            return nk

        walk(0)
        return out


def predict(tree: DecisionTree, x) -> RadioChoice:
    return tree.predict_one(x)


def prune_dead(tree: DecisionTree, X: np.ndarray) -> DecisionTree:
    """Remove branches no training point reaches and merge same-label sibling leaves."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = tree.copy()

    def walk(k, idx):
        if t.is_leaf(k):
            return
        go = X[idx, t.feature[k]] <= t.threshold[k]
        li, ri = idx[go], idx[~go]
        if len(idx) and len(li) == 0:
            _hoist(k, t.right[k])
            return walk(k, idx)
        if len(idx) and len(ri) == 0:
            _hoist(k, t.left[k])
            return walk(k, idx)
        walk(t.left[k], li)
        walk(t.right[k], ri)
        lk, rk = t.left[k], t.right[k]
        if t.is_leaf(lk) and t.is_leaf(rk) and t.value[lk] == t.value[rk]:
            t.set_leaf(k, t.value[lk])

    def _hoist(k, child):
        t.feature[k], t.threshold[k] = t.feature[child], t.threshold[child]
        t.left[k], t.right[k], t.value[k] = t.left[child], t.right[child], t.value[child]

    walk(0, np.arange(len(X)))
    return t.compact()


def serialize(tree: DecisionTree) -> str:
    lines = [f"# mesonet-tree v1 nodes={tree.n_nodes} max_depth={tree.max_depth}"]
    for k in range(tree.n_nodes):
        if tree.is_leaf(k):
            lines.append(f"{k} leaf {tree.value[k]}")
        else:
            lines.append(f"{k} split {tree.feature[k]} {tree.threshold[k]!r} {tree.left[k]} {tree.right[k]}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> DecisionTree:
    rows = {}
    max_depth = 8
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line.split():
                if tok.startswith("max_depth="):
                    max_depth = int(tok.split("=", 1)[1])
            continue
        parts = line.split()
        try:
            k = int(parts[0])
            if parts[1] == "leaf" and len(parts) == 3:
                rows[k] = ("leaf", int(parts[2]))
            elif parts[1] == "split" and len(parts) == 6:
                rows[k] = ("split", int(parts[2]), float(parts[3]), int(parts[4]), int(parts[5]))
            else:
                raise ValueError
        except (ValueError, IndexError):
            raise TreeError(f"line {lineno}: cannot parse {line!r}") from None
    if sorted(rows) != list(range(len(rows))) or not rows:
        raise TreeError("node ids must be dense from 0")
    t = DecisionTree(feature=[], threshold=[], left=[], right=[], value=[], max_depth=max_depth)
    for k in range(len(rows)):
        t.add_node()
    for k, r in rows.items():
        if r[0] == "leaf":
            t.set_leaf(k, r[1])
        else:
            t.set_split(k, r[1], r[2], r[3], r[4])
    t.validate()
    return t
