"""End-to-end Zigbee path quality from per-link beacon windows, and its staleness.

Every node records the beacon bits it hears from each neighbor, so the link
between path nodes ``p[i-1]`` and ``p[i]`` is known at ``p[i-1]``, which is
``i-1`` hops from the source. A window that travels ``h`` hops is ``h``
per-hop delays old on arrival; meanwhile the link keeps evolving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimation import DEFAULT_ALPHA, link_metrics


class PathQualityError(ValueError):
    pass


PER_HOP_DELAY = 0.033


@dataclass(frozen=True)
class PathQuality:
    hn: int
    prr_e2e: float
    rnp_e2e: float


@dataclass(frozen=True)
class LinkEstimate:
    prr: float
    rnp: float


def aggregate_path(links, n: int, hn: int | None = None) -> PathQuality:
    """Combine the first ``n`` link estimates (source side first).

    PRR multiplies along the path and RNP adds; ``hn`` is the full route
    length whatever ``n`` is.
    """
    links = list(links)
    if not links:
        raise PathQualityError("empty estimate list")
    if not 1 <= n <= len(links):
        raise PathQualityError(f"n={n} outside 1..{len(links)}")
    p, r = 1.0, 0.0
    for e in links[:n]:
        p *= e.prr
        r += e.rnp
    return PathQuality(hn if hn is not None else len(links), p, r)


def bit_similarity(snapshot_bits, truth_bits) -> float:
    a = np.asarray(snapshot_bits)
    b = np.asarray(truth_bits)
    if a.shape != b.shape:
        raise PathQualityError(f"window length mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise PathQualityError("empty windows")
    return float((a == b).mean())


@dataclass(frozen=True)
class PropagatedSnapshot:
    link: tuple[int, int]
    bits: np.ndarray = field(repr=False)
    origin_time: float
    hops_traversed: int

    def arrival(self, per_hop_delay: float = PER_HOP_DELAY) -> float:
        return self.origin_time + self.hops_traversed * per_hop_delay


def propagate_traditional(channels, links, now: float, per_hop_delay: float = PER_HOP_DELAY,
                          alpha: int = DEFAULT_ALPHA, recorder_offset: int = 0):
    """Snapshots available at the source at time ``now``.

    ``channels[link]`` is a ``LinkChannel``; ``links`` lists route links from
    the source. Link ``i`` (0-based) is recorded ``i + recorder_offset`` hops
    away, so its freshest window left its recorder that many hop delays ago.
    """
    out = []
    for i, lk in enumerate(links):
        h = i + recorder_offset
        t0 = now - h * per_hop_delay
        out.append(PropagatedSnapshot(lk, channels[lk].window(t0, alpha).copy(), t0, h))
    return out


def path_features(channels, links, now: float, n: int, per_hop_delay: float = PER_HOP_DELAY,
                  alpha: int = DEFAULT_ALPHA) -> PathQuality:
    """Features from the windows of the first ``n`` links as they are known at ``now``."""
    n = min(n, len(links))
    snaps = propagate_traditional(channels, links[:n], now, per_hop_delay, alpha)
    ests = [LinkEstimate(*link_metrics(s.bits, alpha)) for s in snaps]
    return aggregate_path(ests, n, hn=len(links))


def staleness_curve(channel_factory, max_hops: int, n_samples: int, rng: np.random.Generator,
                    per_hop_delay: float = PER_HOP_DELAY, alpha: int = DEFAULT_ALPHA, warmup: float = 5.0):
    """Mean and standard error of window similarity after ``h`` hops of transit.

    For each sample a fresh link is drawn from ``channel_factory(rng)`` and a
    random observation time is chosen; the window that left its recorder
    ``h`` hop delays earlier is compared to the window at that time.
    Returns rows ``(hop, mean_similarity, stderr)`` for ``hop = 0..max_hops``.
    """
    sims = np.empty((n_samples, max_hops + 1))
    for s in range(n_samples):
        ch = channel_factory(rng)
        now = warmup + rng.uniform(0, 60.0)
        truth = ch.window(now, alpha)
        for h in range(max_hops + 1):
            sims[s, h] = bit_similarity(ch.window(now - h * per_hop_delay, alpha), truth)
    mean = sims.mean(axis=0)
    se = sims.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.zeros(max_hops + 1)
    return [(h, float(mean[h]), float(se[h])) for h in range(max_hops + 1)]


def partial_path_similarity(curve, rpn: int) -> float:
    """Mean freshness of the windows a source uses when it reads ``rpn`` links.

    Link ``i`` is recorded ``i`` hops away (the first is local), so the mean
    covers hops ``0..rpn-1`` of the staleness curve.
    """
    sims = {h: m for h, m, _ in curve}
    if rpn < 1 or rpn - 1 not in sims:
        raise PathQualityError(f"rpn={rpn} outside the curve")
    return float(np.mean([sims[h] for h in range(rpn)]))


@dataclass
class RpnSelection:
    rpn: int
    accuracy_by_n: dict  # n -> (train, test)
    gain_pp: float = 1.0


def choose_rpn(datasets: dict, trainer, k: int = 5, seed: int = 0, gain_pp: float = 1.0,
               accuracies: dict | None = None) -> RpnSelection:
    """Knee rule over path lengths.

    Trains a tree for every ``n`` with k-fold CV and returns the smallest
    ``n`` for which reading one more link raises mean test accuracy by less
    than ``gain_pp`` percentage points (the largest ``n`` if gains never flatten).
    ``accuracies`` may supply precomputed ``n -> (train, test)`` results.
    """
    from .dtree import kfold_accuracy

    if len(datasets if accuracies is None else accuracies) < 2:
        raise PathQualityError("need datasets for at least two values of n")
    if accuracies is None:
        accuracies = {}
        for n in sorted(datasets):
            res = kfold_accuracy(datasets[n], k=k, trainer=trainer, seed=seed)
            accuracies[n] = (res.train_mean, res.test_mean)
    ns = sorted(accuracies)
    rpn = ns[-1]
    for a, b in zip(ns, ns[1:]):
        if (accuracies[b][1] - accuracies[a][1]) * 100.0 < gain_pp:
            rpn = a
            break
    return RpnSelection(rpn, dict(accuracies), gain_pp)


def curve_csv(curve) -> str:
    lines = ["hop,mean_similarity,stderr"]
    lines += [f"{h},{m:.6f},{se:.6f}" for h, m, se in curve]
    return "\n".join(lines) + "\n"
