import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesonet.channel import GilbertElliottLink, LinkChannel
from mesonet.dtree import LabeledDataset, tao_trainer
from mesonet.estimation import link_metrics
from mesonet.pathquality import (LinkEstimate, PathQualityError, aggregate_path, bit_similarity, choose_rpn,
                                 curve_csv, partial_path_similarity, path_features, propagate_traditional,
                                 staleness_curve)
from mesonet.sim import SimConfig
from mesonet.sim.experiments import ExperimentConfig, staleness_study

link_est = st.builds(LinkEstimate, st.floats(0, 1), st.floats(1, 10))


def test_aggregate_examples():
    q = aggregate_path([LinkEstimate(0.9, 1.2)], 1)
    assert (q.hn, q.prr_e2e, q.rnp_e2e) == (1, 0.9, 1.2)
    q = aggregate_path([LinkEstimate(1.0, 1.0)] * 2, 2)
    assert (q.prr_e2e, q.rnp_e2e) == (1.0, 2.0)
    q = aggregate_path([LinkEstimate(0.9, 1.0), LinkEstimate(0.8, 1.0)], 2)
    assert q.prr_e2e == pytest.approx(0.72)


def test_aggregate_keeps_full_hop_count():
    q = aggregate_path([LinkEstimate(0.5, 2.0)] * 5, 2)
    assert q.hn == 5 and q.prr_e2e == 0.25 and q.rnp_e2e == 4.0


def test_aggregate_errors():
    with pytest.raises(PathQualityError):
        aggregate_path([], 1)
    with pytest.raises(PathQualityError):
        aggregate_path([LinkEstimate(1, 1)], 2)
    with pytest.raises(PathQualityError):
        aggregate_path([LinkEstimate(1, 1)], 0)


@given(st.lists(link_est, min_size=1, max_size=10))
def test_full_path_identity(links):
    q = aggregate_path(links, len(links))
    assert q.prr_e2e == pytest.approx(float(np.prod([e.prr for e in links])))
    assert q.rnp_e2e == pytest.approx(sum(e.rnp for e in links))
    assert 0 <= q.prr_e2e <= 1
    assert q.rnp_e2e >= len(links) - 1e-9


@given(st.lists(st.lists(st.integers(0, 1), min_size=10, max_size=10), min_size=1, max_size=6))
def test_rnp_lower_bound_from_windows(windows):
    ests = [LinkEstimate(*link_metrics(np.array(w, dtype=np.int8), 10)) for w in windows]
    assert aggregate_path(ests, len(ests)).rnp_e2e >= len(ests)


def test_bit_similarity_examples():
    a = np.array([1, 0, 1, 1, 0, 1, 0, 1, 1, 0])
    assert bit_similarity(a, a) == 1.0
    assert bit_similarity(a, 1 - a) == 0.0
    b = a.copy()
    b[:3] ^= 1
    assert bit_similarity(b, a) == pytest.approx(0.7)
    with pytest.raises(PathQualityError, match="mismatch"):
        bit_similarity(a, a[:5])


def _channels(n, seed=0):
    rng = np.random.default_rng(seed)
    links = [(k, k - 1) for k in range(n, 0, -1)]
    return {lk: LinkChannel(GilbertElliottLink(0.05, 0.1, 0.9, 0.1), rng) for lk in links}, links


def test_propagation_delay():
    ch, links = _channels(3)
    snaps = propagate_traditional(ch, links, 10.0, recorder_offset=1)
    assert snaps[0].hops_traversed == 1
    assert snaps[0].arrival() == pytest.approx(10.0)
    assert snaps[0].origin_time == pytest.approx(10.0 - 0.033)
    assert [s.hops_traversed for s in snaps] == [1, 2, 3]


def test_zero_delay_is_fresh():
    ch, links = _channels(4)
    for s in propagate_traditional(ch, links, 20.0, per_hop_delay=0.0):
        assert bit_similarity(s.bits, ch[s.link].window(20.0, 10)) == 1.0


def test_path_features_product_of_windows():
    ch, links = _channels(4)
    q = path_features(ch, links, 30.0, n=2)
    p = [link_metrics(ch[lk].window(30.0 - i * 0.033, 10), 10) for i, lk in enumerate(links[:2])]
    assert q.hn == 4
    assert q.prr_e2e == pytest.approx(p[0][0] * p[1][0])
    assert q.rnp_e2e == pytest.approx(p[0][1] + p[1][1])


def test_staleness_curve_shape():
    def factory(rng):
        return LinkChannel(GilbertElliottLink(0.05, 0.1, 0.9, 0.1), rng)

    curve = staleness_curve(factory, 6, 300, np.random.default_rng(0))
    assert curve[0][1] == 1.0
    means = [m for _, m, _ in curve]
    assert all(a >= b - 0.02 for a, b in zip(means, means[1:]))
    assert curve_csv(curve).splitlines()[0] == "hop,mean_similarity,stderr"


def test_default_calibration_staleness():
    curve, dt = staleness_study(SimConfig(), ExperimentConfig(staleness_samples=800))
    assert curve[3][1] == pytest.approx(0.70, abs=0.10)
    dt = dict(dt)
    # reading only the first n links always uses fresher windows than a full path of n+ hops
    for n in range(1, 6):
        for h in range(n, len(curve)):
            assert dt[n] >= curve[h][1]


def test_partial_similarity_bounds():
    curve = [(0, 1.0, 0), (1, 0.9, 0), (2, 0.8, 0)]
    assert partial_path_similarity(curve, 1) == 1.0
    assert partial_path_similarity(curve, 3) == pytest.approx(0.9)
    with pytest.raises(PathQualityError):
        partial_path_similarity(curve, 4)


def _synthetic(label_rule, n_rows=600, max_n=4, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.3, 1.0, size=(n_rows, max_n))
    rnp = 1 / p
    y = label_rule(p).astype(np.int8)
    tz = np.where(y == 0, 2.0, 1.0)
    out = {}
    for n in range(1, max_n + 1):
        X = np.column_stack([np.full(n_rows, max_n), rng.normal(-72, 1, n_rows), p[:, :n].prod(1),
                             rnp[:, :n].sum(1)])
        out[n] = LabeledDataset(X, y, tz, 3.0 - tz)
    return out


def test_rpn_link_one_only():
    sel = choose_rpn(_synthetic(lambda p: p[:, 0] > 0.65), tao_trainer(), k=5)
    assert sel.rpn == 1
    assert set(sel.accuracy_by_n) == {1, 2, 3, 4}


def test_rpn_more_links_help_when_labels_need_them():
    sel = choose_rpn(_synthetic(lambda p: p.prod(1) > 0.25, seed=1), tao_trainer(), k=5)
    acc = sel.accuracy_by_n
    assert acc[4][1] >= acc[1][1] - 0.02
    assert sel.rpn >= 2


def test_rpn_needs_two_values():
    with pytest.raises(PathQualityError):
        choose_rpn({1: None}, tao_trainer())


def test_knee_rule_on_table():
    acc = {1: (0, 0.70), 2: (0, 0.75), 3: (0, 0.80), 4: (0, 0.805), 5: (0, 0.81)}
    assert choose_rpn({}, None, accuracies=acc).rpn == 3
    rising = {n: (0, 0.5 + 0.05 * n) for n in range(1, 6)}
    assert choose_rpn({}, None, accuracies=rising).rpn == 5
