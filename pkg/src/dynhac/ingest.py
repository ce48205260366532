"""Point sets, exact k-NN similarity graphs and insertion/deletion update streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .engine import UpdateBatch
from .errors import DynHACError
from .graph import Edge, VertexId

SIMILARITIES = ("invdist", "cosine")
COSINE_FLOOR = 1e-12


@dataclass
class PointSet:
    ids: np.ndarray
    X: np.ndarray
    labels: Optional[List[Optional[str]]] = None

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != self.ids.shape[0]:
            raise DynHACError("points must form an (n, d) array matching the id list")
        if len(np.unique(self.ids)) != len(self.ids):
            raise DynHACError("point ids must be unique")
        if self.labels is not None and len(self.labels) != len(self.ids):
            raise DynHACError("label list length differs from the number of points")

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def label_map(self) -> Dict[VertexId, Hashable]:
        if self.labels is None:
            return {}
        return {int(i): lab for i, lab in zip(self.ids, self.labels) if lab not in (None, "")}


def synth_blobs(
    num_clusters: int = 10,
    per_cluster: int = 200,
    d: int = 2,
    spread: float = 0.5,
    seed: int = 0,
    box: float = 20.0,
) -> PointSet:
    """Isotropic Gaussian blobs with centres drawn uniformly from ``[0, box]^d``."""
    if num_clusters < 1 or per_cluster < 1 or d < 1 or not spread > 0:
        raise ValueError("num_clusters, per_cluster, d and spread must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, box, size=(num_clusters, d))
    X = np.concatenate([c + spread * rng.standard_normal((per_cluster, d)) for c in centers])
    labels = [str(c) for c in range(num_clusters) for _ in range(per_cluster)]
    return PointSet(np.arange(num_clusters * per_cluster), X, labels)


def _similarity_block(Q: np.ndarray, C: np.ndarray, sim: str) -> np.ndarray:
    if sim == "invdist":
        diff = Q[:, None, :] - C[None, :, :]
        return 1.0 / (1.0 + np.sqrt((diff * diff).sum(axis=2)))
    if sim == "cosine":
        qn = np.linalg.norm(Q, axis=1, keepdims=True)
        cn = np.linalg.norm(C, axis=1, keepdims=True)
        qn[qn == 0] = 1.0
        cn[cn == 0] = 1.0
        cos = (Q / qn) @ (C / cn).T
        return np.maximum((1.0 + np.clip(cos, -1.0, 1.0)) / 2.0, COSINE_FLOOR)
    raise ValueError(f"unknown similarity {sim!r}; expected one of {SIMILARITIES}")


def _top_k(sims: np.ndarray, ids: np.ndarray, k: int) -> np.ndarray:
    """Positions of the ``k`` most similar candidates; equal similarities go to smaller ids."""
    n = sims.shape[0]
    if n <= k:
        return np.arange(n)
    part = np.argpartition(-sims, k - 1)[:k]
    kth = sims[part].min()
    above = np.flatnonzero(sims > kth)
    tied = np.flatnonzero(sims == kth)
    need = k - above.shape[0]
    if tied.shape[0] > need:
        tied = tied[np.argsort(ids[tied], kind="stable")[:need]]
    return np.concatenate([above, tied])


def knn_edges(
    ps: PointSet,
    query_ids: Sequence[VertexId],
    candidate_ids: Sequence[VertexId],
    k: int,
    sim: str = "invdist",
    chunk: int = 256,
) -> List[Edge]:
    """Edges from every query to its ``k`` most similar candidates (itself excluded).

    Symmetric duplicates are collapsed; edges come out as ``(u, v, w)`` with ``u < v``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if sim not in SIMILARITIES:
        raise ValueError(f"unknown similarity {sim!r}; expected one of {SIMILARITIES}")
    pos = {int(v): i for i, v in enumerate(ps.ids)}
    q = np.array([pos[int(v)] for v in query_ids], dtype=np.int64)
    c = np.array([pos[int(v)] for v in candidate_ids], dtype=np.int64)
    out: Dict[Tuple[int, int], float] = {}
    if q.size == 0 or c.size == 0:
        return []
    cids = ps.ids[c]
    C = ps.X[c]
    for a in range(0, q.size, chunk):
        block = q[a:a + chunk]
        S = _similarity_block(ps.X[block], C, sim)
        for row, qi in enumerate(block):
            qid = int(ps.ids[qi])
            sims = S[row]
            keep = cids != qid
            sel = _top_k(sims[keep], cids[keep], k)
            for cid, w in zip(cids[keep][sel], sims[keep][sel]):
                cid = int(cid)
                key = (qid, cid) if qid < cid else (cid, qid)
                out.setdefault(key, float(w))
    return [(u, v, w) for (u, v), w in sorted(out.items())]


def _prior_knn(ps: PointSet, order: np.ndarray, k: int, sim: str, chunk: int = 256) -> List[List[Edge]]:
    """For each position j in ``order``, edges to the k nearest among ``order[:j]``."""
    n = order.shape[0]
    X = ps.X[order]
    ids = ps.ids[order]
    result: List[List[Edge]] = []
    for a in range(0, n, chunk):
        b = min(n, a + chunk)
        if b == 0:
            break
        S = _similarity_block(X[a:b], X[:b], sim)
        for row in range(b - a):
            j = a + row
            v = int(ids[j])
            if j == 0:
                result.append([])
                continue
            sims = S[row, :j]
            sel = _top_k(sims, ids[:j], k)
            result.append([(v, int(ids[x]), float(sims[x])) for x in sorted(sel, key=lambda x: ids[x])])
    return result


def _dedup(edges: Sequence[Edge]) -> List[Edge]:
    out: Dict[Tuple[int, int], float] = {}
    for u, v, w in edges:
        key = (u, v) if u < v else (v, u)
        out.setdefault(key, w)
    return [(u, v, w) for (u, v), w in sorted(out.items())]


def insertion_stream(
    ps: PointSet,
    k: int = 50,
    prefix_fraction: float = 0.99,
    sim: str = "invdist",
    seed: int = 0,
) -> List[UpdateBatch]:
    """Random insertion order; a bulk prefix batch followed by one batch per point.

    Every point links to its ``k`` most similar points among those inserted
    before it, including points earlier in the prefix batch.
    """
    if not 0.0 <= prefix_fraction <= 1.0:
        raise ValueError("prefix_fraction must lie in [0, 1]")
    n = len(ps)
    order = np.random.default_rng(seed).permutation(n)
    per_point = _prior_knn(ps, order, k, sim)
    ids = [int(v) for v in ps.ids[order]]
    m = int(round(prefix_fraction * n))
    stream: List[UpdateBatch] = []
    if m > 0:
        edges = [e for j in range(m) for e in per_point[j]]
        stream.append(UpdateBatch(ids[:m], _dedup(edges), []))
    for j in range(m, n):
        stream.append(UpdateBatch([ids[j]], list(per_point[j]), []))
    return stream


def deletion_stream(
    ps: PointSet,
    k: int = 50,
    num_batches: int = 100,
    sim: str = "invdist",
    seed: int = 0,
) -> Tuple[UpdateBatch, List[UpdateBatch]]:
    """Build graph from batched k-NN, then single-point deletions newest first.

    Points are shuffled and split into ``num_batches`` batches; a point of
    batch ``i`` links to its ``k`` nearest points among batches ``1..i``.
    """
    if num_batches < 1:
        raise ValueError("num_batches must be at least 1")
    n = len(ps)
    order = np.random.default_rng(seed).permutation(n)
    ids = [int(v) for v in ps.ids[order]]
    edges: List[Edge] = []
    upto = 0
    for part in np.array_split(np.arange(n), min(num_batches, max(n, 1))):
        if part.size == 0:
            continue
        upto = int(part[-1]) + 1
        edges.extend(knn_edges(ps, ids[int(part[0]):upto], ids[:upto], k, sim))
    build = UpdateBatch(list(ids), _dedup(edges), [])
    deletions = [UpdateBatch([], [], [v]) for v in reversed(ids)]
    return build, deletions
