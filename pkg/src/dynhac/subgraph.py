"""Restricted (1+eps)-approximate HAC on a single partition subgraph."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set

from .errors import DynHACError, MissingEdgeError, UnknownVertexError
from .graph import ClusteredGraph, VertexId
from .records import MergeRecord

# Slack on the goodness test so that float noise never blocks an exact merge.
GOODNESS_SLACK = 1e-12

IdAllocator = Callable[[VertexId, VertexId], VertexId]


@dataclass
class PartitionSubgraph:
    """A partition plus its boundary, holding every edge incident to the partition.

    Boundary (inactive) vertices only carry their edges into the partition.
    """

    graph: ClusteredGraph
    active: FrozenSet[VertexId]

    @property
    def inactive(self) -> Set[VertexId]:
        return set(self.graph.sizes) - self.active


@dataclass
class SubgraphHacResult:
    merges: List[MergeRecord]
    contracted: ClusteredGraph
    parent_of: Dict[VertexId, VertexId] = field(default_factory=dict)
    active_roots: Set[VertexId] = field(default_factory=set)

    def root(self, v: VertexId) -> VertexId:
        parent_of = self.parent_of
        while v in parent_of:
            v = parent_of[v]
        return v


def build_partition_subgraph(g: ClusteredGraph, p: Iterable[VertexId]) -> PartitionSubgraph:
    p = frozenset(p)
    if not p:
        raise DynHACError("empty partition")
    gs, ga = g.sizes, g.adj
    sub = ClusteredGraph()
    sizes, adj = sub.sizes, sub.adj
    for v in p:
        if v not in gs:
            raise UnknownVertexError(v)
        sizes[v] = gs[v]
        adj[v] = dict(ga[v])
    for v in p:
        for x, w in ga[v].items():
            if x in p:
                continue
            ax = adj.get(x)
            if ax is None:
                sizes[x] = gs[x]
                ax = adj[x] = {}
            ax[v] = w
    return PartitionSubgraph(sub, p)


def goodness(
    h: PartitionSubgraph,
    min_merge: Mapping[VertexId, float],
    u: VertexId,
    v: VertexId,
    floor: float = 0.0,
) -> float:
    """``max(wmax(u), wmax(v)) / min(M(u), M(v), wbar(u, v))`` on ``h``."""
    g = h.graph
    if v not in g.adj.get(u, ()):
        raise MissingEdgeError((u, v))
    s = g.normalized_weight(u, v)
    return max(g.wmax(u, floor), g.wmax(v, floor)) / min(min_merge[u], min_merge[v], s)


def counter_allocator(start: int) -> IdAllocator:
    it = itertools.count(start)
    return lambda u, v: next(it)


def subgraph_hac(
    h: PartitionSubgraph,
    min_merge: Mapping[VertexId, float],
    epsilon: float,
    floor: float = 0.0,
    new_id: Optional[IdAllocator] = None,
    round_index: int = 1,
    partition: Optional[VertexId] = None,
) -> SubgraphHacResult:
    """Merge active vertices of ``h`` through (1+epsilon)-good merges until none is left.

    Candidates are scanned heaviest first. A candidate that fails the
    goodness test is parked and re-queued once the best edge at one of its
    endpoints may have dropped, i.e. when a neighbour of that endpoint
    merges. Edges lighter than ``floor`` are never merged and do not count
    towards wmax. ``h`` is contracted in place and returned as
    ``result.contracted``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    g = h.graph
    sizes, adj = g.sizes, g.adj
    if new_id is None:
        new_id = counter_allocator(max(sizes, default=-1) + 1)
    active: Set[VertexId] = set(h.active)
    M: Dict[VertexId, float] = {v: min_merge[v] for v in active}
    bound = (1.0 + epsilon) * (1.0 + GOODNESS_SLACK)

    wmax_cache: Dict[VertexId, float] = {}

    def wmax(x: VertexId) -> float:
        c = wmax_cache.get(x)
        if c is None:
            sx = sizes[x]
            c = 0.0
            for y, w in adj[x].items():
                s = w / (sx * sizes[y])
                if s >= floor and s > c:
                    c = s
            wmax_cache[x] = c
        return c

    heap = []
    for u in active:
        su = sizes[u]
        for v, w in adj[u].items():
            if u < v and v in active:
                s = w / (su * sizes[v])
                if s >= floor:
                    heap.append((-s, u, v))
    heapq.heapify(heap)

    blocked: Dict[VertexId, Set[VertexId]] = {}
    merges: List[MergeRecord] = []
    parent_of: Dict[VertexId, VertexId] = {}

    while True:
        while heap:
            negs, u, v = heapq.heappop(heap)
            if u not in active or v not in active:
                continue
            s = -negs
            denom = min(M[u], M[v], s)
            if max(wmax(u), wmax(v)) > bound * denom:
                blocked.setdefault(u, set()).add(v)
                blocked.setdefault(v, set()).add(u)
                continue
            z = new_id(u, v)
            g.contract(u, v, z)
            active.discard(u)
            active.discard(v)
            active.add(z)
            M[z] = denom
            parent_of[u] = z
            parent_of[v] = z
            merges.append(MergeRecord(u, v, z, s, round_index, len(merges), partition))
            for dead in (u, v):
                wmax_cache.pop(dead, None)
                for y in blocked.pop(dead, ()):
                    blocked[y].discard(dead)
            sz = sizes[z]
            for x, w in adj[z].items():
                wmax_cache.pop(x, None)
                if x not in active:
                    continue
                sx = w / (sz * sizes[x])
                if sx >= floor:
                    heapq.heappush(heap, (-sx, z, x) if z < x else (-sx, x, z))
                parked = blocked.pop(x, None)
                if parked:
                    for y in parked:
                        blocked[y].discard(x)
                        sy = adj[x][y] / (sizes[x] * sizes[y])
                        heapq.heappush(heap, (-sy, x, y) if x < y else (-sy, y, x))
        # safety net: nothing good may remain when we stop
        found = False
        for u in active:
            su = sizes[u]
            for v, w in adj[u].items():
                if u < v and v in active:
                    s = w / (su * sizes[v])
                    if s >= floor and max(wmax(u), wmax(v)) <= bound * min(M[u], M[v], s):
                        heapq.heappush(heap, (-s, u, v))
                        found = True
        if not found:
            break
        blocked.clear()

    return SubgraphHacResult(merges, g, parent_of, active)
