"""Reference static HAC, the merge-goodness certifier and small brute-force helpers."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

from .dendrogram import Dendrogram
from .graph import ClusteredGraph, VertexId
from .records import MergeRecord

# Smallest positive double; used as a threshold that admits every positive edge.
TINY_THRESHOLD = 5e-324

CERT_TOL = 1e-9


def eligibility_floor(epsilon: float, t: float) -> float:
    return t / (1.0 + epsilon)


def seq_hac(
    g: ClusteredGraph,
    epsilon: float = 0.0,
    t: float = TINY_THRESHOLD,
    first_id: Optional[int] = None,
) -> Tuple[Dendrogram, List[MergeRecord]]:
    """Greedy average-linkage HAC: always contract the heaviest eligible edge.

    An edge is eligible while its normalized weight is at least ``t/(1+epsilon)``.
    Ties go to the lexicographically smallest ``(u, v)`` with ``u < v``. The
    input graph is left untouched.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if not t > 0:
        raise ValueError("threshold must be positive")
    floor = eligibility_floor(epsilon, t)
    work = g.copy()
    sizes, adj = work.sizes, work.adj
    d = Dendrogram()
    d.add_leaves(sorted(sizes))
    for v, s in sizes.items():
        d.nodes[v].size = s
    next_id = (max(sizes, default=-1) + 1) if first_id is None else first_id

    heap = []
    for u, v, w in work.edges():
        s = w / (sizes[u] * sizes[v])
        if s >= floor:
            heap.append((-s, u, v))
    heapq.heapify(heap)

    merges: List[MergeRecord] = []
    while heap:
        negs, u, v = heapq.heappop(heap)
        if u not in sizes or v not in sizes:
            continue
        z = next_id
        next_id += 1
        s = -negs
        work.contract(u, v, z)
        d.merge(u, v, z, s)
        merges.append(MergeRecord(u, v, z, s, 1, len(merges), None))
        sz = sizes[z]
        for x, w in adj[z].items():
            sx = w / (sz * sizes[x])
            if sx >= floor:
                heapq.heappush(heap, (-sx, z, x) if z < x else (-sx, x, z))
    return d, merges


def brute_force_flat(g: ClusteredGraph, theta: float) -> Dict[VertexId, VertexId]:
    """Exact HAC on ``g`` followed by a cut at ``theta``."""
    d, _ = seq_hac(g, 0.0, TINY_THRESHOLD)
    return d.flatten(theta)


def replay_rounds(g_input: ClusteredGraph, merges: Sequence[MergeRecord]) -> List[ClusteredGraph]:
    """Contract ``g_input`` round by round; element ``i`` is the graph before round ``i + 1``."""
    out = [g_input.copy()]
    g = g_input.copy()
    current = None
    for rec in merges:
        if current is not None and rec.round != current:
            out.append(g.copy())
        current = rec.round
        g.contract(rec.u, rec.v, rec.parent)
    if current is not None:
        out.append(g)
    return out


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    seq: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted


ACCEPTED = Verdict(True)


class _View:
    """One partition's picture of a round graph: round-start state plus its own merges."""

    __slots__ = ("g", "rep", "ladj", "lsize")

    def __init__(self, g: ClusteredGraph) -> None:
        self.g = g
        self.rep: Dict[VertexId, VertexId] = {}
        self.ladj: Dict[VertexId, Dict[VertexId, float]] = {}
        self.lsize: Dict[VertexId, int] = {}

    def alive(self, x: VertexId) -> bool:
        if x in self.rep:
            return False
        return x in self.lsize or x in self.g.sizes

    def find(self, x: VertexId) -> VertexId:
        rep = self.rep
        root = x
        while root in rep:
            root = rep[root]
        while x != root:
            nxt = rep[x]
            rep[x] = root
            x = nxt
        return root

    def size(self, x: VertexId) -> int:
        s = self.lsize.get(x)
        return self.g.sizes[x] if s is None else s

    def adj(self, x: VertexId) -> Dict[VertexId, float]:
        a = self.ladj.get(x)
        if a is None:
            base = self.g.adj[x]
            if not self.rep:
                a = dict(base)
            else:
                a = {}
                find = self.find
                for y, w in base.items():
                    r = find(y)
                    a[r] = a.get(r, 0.0) + w
            self.ladj[x] = a
        return a

    def wmax(self, x: VertexId, floor: float) -> float:
        sx = self.size(x)
        lsize, gsize = self.lsize, self.g.sizes
        best = 0.0
        for y, w in self.adj(x).items():
            sy = lsize.get(y)
            s = w / (sx * (gsize[y] if sy is None else sy))
            if s >= floor and s > best:
                best = s
        return best

    def merge(self, u: VertexId, v: VertexId, z: VertexId) -> None:
        au = self.ladj.pop(u)
        av = self.ladj.pop(v)
        del au[v]
        del av[u]
        if len(au) < len(av):
            au, av = av, au
        for x, w in av.items():
            au[x] = au.get(x, 0.0) + w
        ladj = self.ladj
        for x, w in au.items():
            lx = ladj.get(x)
            if lx is not None:
                lx.pop(u, None)
                lx.pop(v, None)
                lx[z] = w
        ladj[z] = au
        self.lsize[z] = self.size(u) + self.size(v)
        self.rep[u] = z
        self.rep[v] = z


def certify(
    g_input: ClusteredGraph,
    merges: Sequence[MergeRecord],
    epsilon: float,
    t: float,
    partition_of: Optional[Mapping[int, Hashable]] = None,
    check_complete: bool = False,
    rel_tol: float = CERT_TOL,
) -> Verdict:
    """Replay ``merges`` over ``g_input`` and check every merge was (1+epsilon)-good.

    Merges are grouped by round, and within a round by partition (taken from
    ``partition_of[seq]`` or else the record's own ``partition`` field). Each
    merge is judged on its partition's view: the round-start graph with only
    the earlier merges of the same partition applied. Edges below
    ``t/(1+epsilon)`` never count towards wmax and may not be merged.

    With ``check_complete`` the final graph must also be free of eligible
    edges, i.e. the merge sequence ran to completion.
    """
    floor = eligibility_floor(epsilon, t)
    bound = (1.0 + epsilon) * (1.0 + rel_tol)
    g = g_input.copy()
    M: Dict[VertexId, float] = {}
    inf = math.inf

    def mm(x: VertexId) -> float:
        return M.get(x, inf)

    prev_seq = None
    prev_round = None
    views: Dict[Hashable, _View] = {}
    owner: Dict[VertexId, Hashable] = {}
    local_owner: Dict[VertexId, Hashable] = {}
    pending: List[MergeRecord] = []

    def close_round() -> None:
        for rec in pending:
            g.contract(rec.u, rec.v, rec.parent)
        pending.clear()
        views.clear()
        owner.clear()
        local_owner.clear()

    for rec in merges:
        if prev_seq is not None and rec.seq <= prev_seq:
            return Verdict(False, rec.seq, "sequence numbers not strictly increasing")
        if prev_round is not None and rec.round < prev_round:
            return Verdict(False, rec.seq, "rounds out of order")
        if prev_round is not None and rec.round != prev_round:
            close_round()
        prev_seq, prev_round = rec.seq, rec.round
        key = partition_of[rec.seq] if partition_of is not None else rec.partition
        view = views.get(key)
        if view is None:
            view = views[key] = _View(g)
        u, v, z = rec.u, rec.v, rec.parent
        if u == v:
            return Verdict(False, rec.seq, "self merge")
        for x in (u, v):
            if x in g.sizes:
                o = owner.setdefault(x, key)
                if o != key:
                    return Verdict(False, rec.seq, f"vertex {x} used by two partitions")
            elif local_owner.get(x, key) != key:
                return Verdict(False, rec.seq, f"vertex {x} belongs to another partition")
            if not view.alive(x):
                return Verdict(False, rec.seq, f"vertex {x} is not a live cluster")
        if z in g.sizes or z in local_owner or z in M:
            return Verdict(False, rec.seq, f"parent id {z} already in use")
        au = view.adj(u)
        w = au.get(v)
        if w is None:
            return Verdict(False, rec.seq, f"no edge between {u} and {v}")
        view.adj(v)
        s = w / (view.size(u) * view.size(v))
        if not rec.similarity > 0 or abs(s - rec.similarity) > rel_tol * max(abs(s), abs(rec.similarity)):
            return Verdict(False, rec.seq, f"recorded similarity {rec.similarity!r} != {s!r}")
        if s < floor * (1.0 - rel_tol):
            return Verdict(False, rec.seq, f"similarity {s!r} below floor {floor!r}")
        denom = min(mm(u), mm(v), s)
        num = max(view.wmax(u, floor), view.wmax(v, floor))
        if num > bound * denom:
            return Verdict(False, rec.seq, f"goodness {num / denom!r} exceeds 1+eps")
        view.merge(u, v, z)
        M[z] = denom
        local_owner[z] = key
        pending.append(rec)
    close_round()

    if check_complete:
        sizes = g.sizes
        for a, b, w in g.edges():
            if w / (sizes[a] * sizes[b]) >= floor:
                return Verdict(False, None, f"eligible edge ({a}, {b}) left unmerged")
    return ACCEPTED


def max_goodness(
    g_input: ClusteredGraph,
    merges: Sequence[MergeRecord],
    epsilon: float,
    t: float,
) -> float:
    """Largest goodness over a whole-graph sequential replay of ``merges``.

    Useful as a diagnostic: the smallest epsilon at which a plain sequential
    replay would still accept.
    """
    floor = eligibility_floor(epsilon, t)
    g = g_input.copy()
    M: Dict[VertexId, float] = {}
    worst = 0.0
    for rec in merges:
        s = g.normalized_weight(rec.u, rec.v)
        num = max(g.wmax(rec.u, floor), g.wmax(rec.v, floor))
        denom = min(M.get(rec.u, math.inf), M.get(rec.v, math.inf), s)
        worst = max(worst, num / denom)
        g.contract(rec.u, rec.v, rec.parent)
        M[rec.parent] = denom
    return worst


def leaf_pair_weight(g_leaves: ClusteredGraph, a: Iterable[VertexId], b: Iterable[VertexId]) -> float:
    """Sum of leaf-graph weights between two disjoint leaf sets."""
    bs = set(b)
    total = 0.0
    for x in a:
        for y, w in g_leaves.adj[x].items():
            if y in bs:
                total += w
    return total
