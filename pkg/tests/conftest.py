import numpy as np

from mesonet.dtree import DecisionTree


def noisy_dataset(seed, n=400, flip=0.15):
    """Four features shaped like the selector inputs, labels from a two-feature rule plus noise."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.integers(1, 12, n), rng.normal(-72, 2, n), rng.uniform(0, 1, n),
                         rng.uniform(1, 20, n)])
    y = ((X[:, 1] > -72.5) & (X[:, 2] < 0.7) | (X[:, 0] > 9)).astype(np.int8)
    y ^= (rng.random(n) < flip).astype(np.int8)
    return X, y


def random_tree(rng, depth=8, p_leaf=0.15):
    t = DecisionTree(feature=[], threshold=[], left=[], right=[], value=[], max_depth=depth)
    lo = np.array([1, -80, 0, 1], dtype=float)
    hi = np.array([12, -64, 1, 20], dtype=float)

    def grow(d):
        k = t.add_node()
        if d == depth or (d > 0 and rng.random() < p_leaf):
            t.set_leaf(k, int(rng.integers(0, 2)))
            return k
        f = int(rng.integers(0, 4))
        thr = float(rng.uniform(lo[f], hi[f]))
        lft, rgt = grow(d + 1), grow(d + 1)
        t.set_split(k, f, thr, lft, rgt)
        return k

    grow(0)
    return t


def random_inputs(rng, n):
    return np.column_stack([rng.integers(1, 12, n), rng.uniform(-82, -62, n), rng.uniform(0, 1, n),
                            rng.uniform(1, 22, n)]).astype(float)


# ---------------------------------------------------------------- acceptance reporting

import pytest  # noqa: E402


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records one PASS/FAIL line."""
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config._criteria[n] = line
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
