import numpy as np
import pytest
from conftest import noisy_dataset, random_inputs, random_tree
from hypothesis import given, settings
from hypothesis import strategies as st

from mesonet.dtree import (CartConfig, DecisionTree, LabeledDataset, RadioChoice, TreeError, best_care_split,
                           best_gini_split, cart_trainer, codegen, compile_source, deserialize, from_csv,
                           interpret, kfold_accuracy, label_from_throughput, learning_curve, predict,
                           prune_dead, serialize, tao_optimize, tao_trainer, to_csv, train_cart, train_error)
from mesonet.dtree.codegen import CodegenSyntaxError


def depth1(thr=-72.0):
    t = DecisionTree(feature=[], threshold=[], left=[], right=[], value=[])
    for _ in range(3):
        t.add_node()
    t.set_split(0, 1, thr, 1, 2)
    t.set_leaf(1, 0)
    t.set_leaf(2, 1)
    return t


def separable(n=100, seed=0):
    rng = np.random.default_rng(seed)
    X = random_inputs(rng, n)
    X[:, 1] = np.where(rng.random(n) < 0.5, rng.uniform(-80, -73, n), rng.uniform(-71, -64, n))
    return X, (X[:, 1] > -72).astype(np.int8)


# ---------------------------------------------------------------- CART

def test_single_class_is_leaf():
    X, _ = noisy_dataset(0)
    t = train_cart(X, np.ones(len(X)))
    assert t.n_nodes == 1 and t.value[0] == 1


def test_separable_depth_one():
    X, y = separable()
    t = train_cart(X, y)
    assert t.depth() == 1 and t.feature[0] == 1
    assert X[y == 0, 1].max() <= t.threshold[0] < X[y == 1, 1].min()
    assert train_error(t, X, y) == 0


def test_small_data_majority_leaf():
    t = train_cart(np.zeros((6, 4)), [1, 1, 1, 0, 0, 1], CartConfig(min_leaf=5))
    assert t.n_nodes == 1 and t.value[0] == 1


def test_cart_errors():
    with pytest.raises(TreeError, match="empty"):
        train_cart(np.empty((0, 4)), [])
    with pytest.raises(TreeError):
        train_cart(np.full((10, 4), np.nan), np.zeros(10))


def test_cart_depth_limit_and_leaf_size():
    X, y = noisy_dataset(1, n=600)
    t = train_cart(X, y, CartConfig(max_depth=4, min_leaf=7))
    assert t.depth() <= 4
    counts = np.bincount(t.apply(X), minlength=t.n_nodes)
    assert all(counts[k] >= 7 for k in t.reachable() if t.is_leaf(k))


def _gini_brute(X, y, min_leaf):
    best = None
    n = len(y)
    for f in range(X.shape[1]):
        u = np.unique(X[:, f])
        for a, b in zip(u[:-1], u[1:]):
            thr = (a + b) / 2
            go = X[:, f] <= thr
            nl = go.sum()
            if nl < min_leaf or n - nl < min_leaf:
                continue
            s = 0.0
            for part in (y[go], y[~go]):
                p = part.mean()
                s += len(part) * (1 - p * p - (1 - p) ** 2)
            if best is None or s < best - 1e-12:
                best = s
    return best


@given(st.integers(0, 10**6), st.integers(8, 30), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_gini_split_exact(seed, n, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, 4)).astype(float)
    y = rng.integers(0, 2, n).astype(np.int8)
    got = best_gini_split(X, y, min_leaf)
    ref = _gini_brute(X, y, min_leaf)
    if ref is None:
        assert got is None
        return
    score, f, thr = got
    assert score == pytest.approx(ref, abs=1e-9)
    go = X[:, f] <= thr
    assert _gini_brute(X[:, [f]], y, min_leaf) is not None
    s = sum(len(p) * (1 - p.mean() ** 2 - (1 - p.mean()) ** 2) for p in (y[go], y[~go]))
    assert s == pytest.approx(score, abs=1e-9)


@given(st.integers(0, 10**6), st.integers(2, 30))
@settings(max_examples=60, deadline=None)
def test_care_split_exact(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(n, 3)).astype(float)
    kind = rng.integers(0, 3, n)
    cl, cr = kind == 1, kind == 2
    got = best_care_split(X, cl, cr)
    brute = None
    for f in range(3):
        u = np.unique(X[:, f])
        for a, b in zip(u[:-1], u[1:]):
            go = X[:, f] <= (a + b) / 2
            e = int((cr & go).sum() + (cl & ~go).sum())
            brute = e if brute is None else min(brute, e)
    if brute is None:
        assert got is None
    else:
        err, f, thr = got
        go = X[:, f] <= thr
        assert err == brute == int((cr & go).sum() + (cl & ~go).sum())


@pytest.mark.parametrize("seed", range(5))
def test_monotone_rescaling_invariance(seed):
    X, y = noisy_dataset(seed, n=150)
    warp = [lambda v: 3 * v + 1, lambda v: np.exp(v / 5), lambda v: v ** 3, lambda v: np.log1p(v)]
    Xw = np.column_stack([w(X[:, f]) for f, w in enumerate(warp)])
    a = train_cart(X, y).predict(X)
    b = train_cart(Xw, y).predict(Xw)
    assert np.array_equal(a, b)
    a = tao_optimize(train_cart(X, y), X, y).predict(X)
    b = tao_optimize(train_cart(Xw, y), Xw, y).predict(Xw)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------- TAO

@pytest.mark.parametrize("seed", range(20))
def test_tao_never_worse_than_cart(seed):
    X, y = noisy_dataset(seed)
    cart = train_cart(X, y, CartConfig(max_depth=4))
    tao = tao_optimize(cart, X, y)  # asserts monotonicity after every update
    assert train_error(tao, X, y) <= train_error(cart, X, y)
    assert tao.n_nodes == cart.n_nodes


def test_tao_strictly_improves_often():
    wins = 0
    for seed in range(20):
        X, y = noisy_dataset(seed)
        cart = train_cart(X, y, CartConfig(max_depth=4))
        wins += train_error(tao_optimize(cart, X, y), X, y) < train_error(cart, X, y)
    assert wins >= 10


def test_tao_keeps_perfect_tree():
    X, y = separable()
    cart = train_cart(X, y)
    tao = tao_optimize(cart, X, y)
    assert np.array_equal(tao.predict(X), cart.predict(X))
    Q = random_inputs(np.random.default_rng(1), 500)
    assert np.array_equal(tao.predict(Q), cart.predict(Q))


def test_tao_arity_mismatch():
    with pytest.raises(TreeError, match="arity"):
        tao_optimize(depth1(), np.zeros((5, 3)), np.zeros(5))


# ---------------------------------------------------------------- predict, prune, serialize, codegen

def test_predict_examples():
    leaf = DecisionTree.leaf(0)
    assert predict(leaf, [3, -50, 0.2, 4]) is RadioChoice.ZIGBEE
    assert predict(depth1(), [3, -60, 0.5, 2]) is RadioChoice.LORA
    assert predict(depth1(), [3, -72, 0.5, 2]) is RadioChoice.ZIGBEE
    assert RadioChoice.ZIGBEE < RadioChoice.LORA


def test_prune_examples():
    t = depth1()
    X = random_inputs(np.random.default_rng(0), 50)
    assert serialize(prune_dead(t, X)) == serialize(t)
    same = depth1()
    same.set_leaf(1, 1)
    p = prune_dead(same, X)
    assert p.n_nodes == 1 and p.value[0] == 1


def test_prune_drops_unreached_branch():
    t = depth1(thr=-100.0)  # no input reaches the left leaf
    X = random_inputs(np.random.default_rng(0), 50)
    p = prune_dead(t, X)
    assert p.n_nodes == 1 and p.value[0] == 1


@pytest.mark.parametrize("seed", range(10))
def test_prune_preserves_training_predictions(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, depth=6)
    X = random_inputs(rng, 300)
    p = prune_dead(t, X)
    assert np.array_equal(p.predict(X), t.predict(X))
    assert p.n_nodes <= t.n_nodes


@pytest.mark.parametrize("seed", range(5))
def test_serialize_roundtrip(seed):
    t = random_tree(np.random.default_rng(seed))
    back = deserialize(serialize(t))
    assert serialize(back) == serialize(t)
    Q = random_inputs(np.random.default_rng(seed + 1), 2000)
    assert np.array_equal(back.predict(Q), t.predict(Q))


def test_deserialize_errors():
    with pytest.raises(TreeError, match="line 2"):
        deserialize("0 split 1 -72.0 1 2\n1 leaf\n2 leaf 1\n")
    with pytest.raises(TreeError, match="dense"):
        deserialize("0 split 1 -72.0 1 5\n1 leaf 0\n5 leaf 1\n")


def test_codegen_examples():
    assert codegen(DecisionTree.leaf(0)) == "return 0;\n"
    src = codegen(depth1())
    assert src.count("if (") == 1 and src.count("else") == 1
    assert "lora_rssi <= -72.0" in src
    assert codegen(depth1()) == src


def test_codegen_parser_rejects_garbage():
    with pytest.raises(CodegenSyntaxError):
        compile_source("if (hn <= 3) { return 1; }")
    with pytest.raises(CodegenSyntaxError):
        compile_source("if (speed <= 3) { return 1; } else { return 0; }")


@pytest.mark.parametrize("seed", range(5))
def test_codegen_matches_predict(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(rng)
    prog = compile_source(codegen(t))
    X = random_inputs(rng, 5000)
    # include inputs exactly on thresholds
    for k in range(0, t.n_nodes, 7):
        if not t.is_leaf(k):
            X[k, t.feature[k]] = t.threshold[k]
    assert [interpret(prog, x) for x in X] == t.predict(X).tolist()


# ---------------------------------------------------------------- datasets and evaluation

def test_labels_tie_to_zigbee():
    assert label_from_throughput([1, 2, 3], [2, 2, 1]).tolist() == [1, 0, 0]


def test_dataset_csv_roundtrip():
    X, y = noisy_dataset(0, n=20)
    ds = LabeledDataset(X, y, np.arange(20.0), np.arange(20.0)[::-1])
    back = from_csv(to_csv(ds))
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)
    assert to_csv(back) == to_csv(ds)
    assert to_csv(ds).splitlines()[0] == "hn,lora_rssi,zigbee_prr,zigbee_rnp,label,tput_zigbee,tput_lora"


def test_dataset_csv_errors():
    with pytest.raises(TreeError, match="no rows"):
        from_csv("hn,lora_rssi,zigbee_prr,zigbee_rnp,label,tput_zigbee,tput_lora\n")
    with pytest.raises(TreeError, match="missing"):
        from_csv("hn,label\n1,0\n")


def _ds(X, y):
    return LabeledDataset(X, y, np.zeros(len(y)), np.zeros(len(y)))


def test_kfold_examples():
    X, y = separable(200)
    res = kfold_accuracy(_ds(X, y), k=5, trainer=cart_trainer())
    assert res.test_mean == 1.0 and len(res.test) == 5
    res = kfold_accuracy(_ds(X, np.zeros(200)), k=5)
    assert res.train_mean == res.test_mean == 1.0
    with pytest.raises(TreeError):
        kfold_accuracy(_ds(X[:3], y[:3]), k=5)
    with pytest.raises(TreeError):
        kfold_accuracy(_ds(X, y), k=1)


def test_kfold_seeded():
    X, y = noisy_dataset(3)
    a = kfold_accuracy(_ds(X, y), seed=4)
    b = kfold_accuracy(_ds(X, y), seed=4)
    assert a.test == b.test


def test_learning_curve():
    X, y = noisy_dataset(2, n=1500, flip=0.05)
    rows = learning_curve(_ds(X, y), [50, 200, 1000], {"tao": tao_trainer()}, seed=0)
    acc = [a for _, _, a in rows]
    assert all(b >= a - 0.03 for a, b in zip(acc, acc[1:]))
    with pytest.raises(TreeError):
        learning_curve(_ds(X, y), [0], {"tao": tao_trainer()})
    with pytest.raises(TreeError):
        learning_curve(_ds(X, y), [5000], {"tao": tao_trainer()})


def test_depth8_artifact_size():
    t = random_tree(np.random.default_rng(0), depth=8, p_leaf=0.0)
    assert t.depth() == 8
    assert len(serialize(t).encode()) + len(codegen(t).encode()) < 64 * 1024
