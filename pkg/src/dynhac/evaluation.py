"""Clustering quality: NMI and the best flat cut over a threshold sweep."""

from __future__ import annotations

from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dendrogram import Dendrogram
from .errors import DynHACError

Clustering = Mapping[Hashable, Hashable]


def default_thresholds(n: int = 40, lo: float = 1e-4, hi: float = 1.0) -> List[float]:
    return [float(x) for x in np.logspace(np.log10(lo), np.log10(hi), n)]


def _codes(labels: Sequence[Hashable]) -> np.ndarray:
    index: Dict[Hashable, int] = {}
    return np.fromiter((index.setdefault(x, len(index)) for x in labels), dtype=np.int64, count=len(labels))


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a: Clustering, b: Clustering) -> float:
    """Mutual information over the arithmetic mean of the two entropies.

    Two zero-entropy clusterings score 1; a zero-entropy clustering against a
    non-trivial one scores 0.
    """
    if a.keys() != b.keys():
        raise DynHACError("clusterings cover different item sets")
    n = len(a)
    if n == 0:
        raise DynHACError("cannot compare empty clusterings")
    items = list(a)
    ca = _codes([a[x] for x in items])
    cb = _codes([b[x] for x in items])
    ka, kb = int(ca.max()) + 1, int(cb.max()) + 1
    joint = np.zeros((ka, kb), dtype=np.float64)
    np.add.at(joint, (ca, cb), 1.0)
    ha = _entropy(joint.sum(axis=1), n)
    hb = _entropy(joint.sum(axis=0), n)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    pa = joint.sum(axis=1) / n
    pb = joint.sum(axis=0) / n
    nz = joint > 0
    pab = joint[nz] / n
    outer = np.outer(pa, pb)[nz]
    mi = float((pab * np.log(pab / outer)).sum())
    score = mi / ((ha + hb) / 2.0)
    assert -1e-12 <= score <= 1.0 + 1e-12, score
    return score


def sweep(
    d: Dendrogram, truth: Clustering, thresholds: Sequence[float]
) -> List[Tuple[float, float, int]]:
    """``(theta, nmi, num_clusters)`` for each threshold, restricted to labelled leaves."""
    rows = []
    for theta in thresholds:
        flat = d.flatten(theta)
        pred = {x: flat[x] for x in truth}
        rows.append((float(theta), nmi(pred, truth), len(set(pred.values()))))
    return rows


def best_cut_nmi(
    d: Dendrogram, truth: Clustering, thresholds: Optional[Sequence[float]] = None
) -> Tuple[float, float]:
    """Threshold with the highest NMI (smallest threshold wins ties) and that NMI."""
    if thresholds is None:
        thresholds = default_thresholds()
    if len(thresholds) == 0:
        raise DynHACError("threshold list is empty")
    best: Optional[Tuple[float, float]] = None
    for theta, score, _ in sweep(d, truth, sorted(thresholds)):
        if best is None or score > best[1]:
            best = (theta, score)
    return best
