"""Dynamic (1+eps)-approximate average-linkage HAC maintained round by round.

Each round ``i`` keeps its graph ``G_i``, the partition map, the merges made
inside every partition and a vertex map sending each vertex of ``G_i`` to the
vertex of ``G_{i+1}`` that contains it. An update is pushed through the rounds
in order; in every round only the partitions whose subgraph may have changed
are re-clustered, and the resulting differences become the update of the next
round.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .dendrogram import Dendrogram
from .errors import DynHACError, SnapshotError, UpdateError
from .graph import ClusteredGraph, Edge, VertexId
from .oracle import Verdict, certify, eligibility_floor
from .partition import DeltaP, PartitionMap, coloring, dirty_partitions, update_partition
from .records import MergeRecord
from .subgraph import SubgraphHacResult, build_partition_subgraph, subgraph_hac

log = logging.getLogger(__name__)

# Leaf ids live below this bound; internal node ids are allocated above it.
LEAF_ID_LIMIT = 1 << 48
SNAPSHOT_VERSION = "dynhac-snapshot/1"


@dataclass
class UpdateBatch:
    """Leaf insertions with their incident edges, and leaf deletions."""

    insert: List[VertexId] = field(default_factory=list)
    edges: List[Edge] = field(default_factory=list)
    delete: List[VertexId] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.insert or self.edges or self.delete)


@dataclass
class RoundReport:
    round: int
    rule: str  # "all" when every partition was re-run, "delta" otherwise
    inserted: int = 0
    deleted: int = 0
    dirty_partitions: int = 0
    dirty_vertices: int = 0
    dirty_edges: int = 0
    merges_new: int = 0
    merges_reused: int = 0
    terminal: bool = False
    locality_violations: int = 0
    seconds: float = 0.0


@dataclass
class UpdateReport:
    rounds: List[RoundReport] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def rounds_touched(self) -> int:
        return len(self.rounds)

    def total(self, name: str) -> int:
        return sum(getattr(r, name) for r in self.rounds)


class RoundState:
    """Graph, partition map, per-partition merges and vertex map of one round."""

    __slots__ = ("graph", "pmap", "vmap", "preimage", "merges", "eligible")

    def __init__(self) -> None:
        self.graph = ClusteredGraph()
        self.pmap = PartitionMap()
        self.vmap: Dict[VertexId, VertexId] = {}
        self.preimage: Dict[VertexId, Set[VertexId]] = {}
        self.merges: Dict[VertexId, List[MergeRecord]] = {}
        self.eligible = 0

    def round_merges(self) -> List[MergeRecord]:
        out: List[MergeRecord] = []
        for p in sorted(self.merges):
            out.extend(self.merges[p])
        return out


def update_min_merge(M: Dict[VertexId, float], merges: Iterable[MergeRecord]) -> None:
    for rec in merges:
        M[rec.parent] = min(M[rec.u], M[rec.v], rec.similarity)


class DynHAC:
    """Engine state plus the update procedure.

    ``track_locality`` makes every round that used the incremental dirty-set
    rule also count dirty-partition members lying outside the 4-hop ball of
    that round's changed vertices (reported, never enforced).
    """

    def __init__(
        self,
        epsilon: float = 0.1,
        threshold: float = 0.01,
        seed: int = 0,
        track_locality: bool = False,
        max_rounds: int = 100_000,
    ) -> None:
        if not (isinstance(epsilon, (int, float)) and epsilon >= 0 and math.isfinite(epsilon)):
            raise ValueError(f"epsilon must be a finite non-negative number, got {epsilon!r}")
        if not (isinstance(threshold, (int, float)) and threshold > 0 and math.isfinite(threshold)):
            raise ValueError(f"threshold must be a finite positive number, got {threshold!r}")
        self.epsilon = float(epsilon)
        self.threshold = float(threshold)
        self.seed = int(seed)
        self.floor = eligibility_floor(self.epsilon, self.threshold)
        self.track_locality = track_locality
        self.max_rounds = max_rounds
        self.rounds: List[RoundState] = []
        self.dendrogram = Dendrogram()
        self.M: Dict[VertexId, float] = {}
        self.next_id = LEAF_ID_LIMIT

    # -- public API ---------------------------------------------------------

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    def leaves(self) -> Set[VertexId]:
        return set(self.rounds[0].graph.sizes) if self.rounds else set()

    def leaf_graph(self) -> ClusteredGraph:
        return self.rounds[0].graph.copy() if self.rounds else ClusteredGraph()

    def insert(self, v: VertexId, edges: Iterable[Tuple[VertexId, float]] = ()) -> UpdateReport:
        return self.apply_update(UpdateBatch([v], [(v, x, w) for x, w in edges], []))

    def delete(self, v: VertexId) -> UpdateReport:
        return self.apply_update(UpdateBatch([], [], [v]))

    def apply_update(self, batch: UpdateBatch) -> UpdateReport:
        start = time.perf_counter()
        report = UpdateReport()
        self._validate(batch)
        if batch.is_empty():
            return report
        D = self.dendrogram
        ins = list(batch.insert)
        dels = set(batch.delete)
        D.add_leaves(ins)
        for v in ins:
            self.M[v] = math.inf

        V: Dict[VertexId, int] = {v: 1 for v in ins}
        E: List[Edge] = list(batch.edges)
        Vd: Set[VertexId] = set(dels)
        i = 0
        cleanup: Iterable[VertexId] = ()
        while True:
            if i >= self.max_rounds:
                raise DynHACError(f"no convergence after {self.max_rounds} rounds")
            if i == len(self.rounds):
                self.rounds.append(RoundState())
            inserted_here = list(V)
            V, E, Vd, rr = self.dynhac_round(i, V, E, Vd)
            report.rounds.append(rr)
            if rr.terminal:
                if len(self.rounds) > i + 1:
                    del self.rounds[i + 1:]
                    cleanup = list(self.rounds[i].graph.sizes)
                else:
                    cleanup = inserted_here
                break
            if not V and not E and not Vd and i + 1 < len(self.rounds):
                break
            i += 1

        removed = D.delete_ancestors(list(cleanup) + sorted(dels))
        for a in removed:
            self.M.pop(a, None)
        D.remove_leaves(sorted(dels))
        for v in dels:
            self.M.pop(v, None)
        if self.rounds and not self.rounds[0].graph.sizes:
            self.rounds.clear()
        report.seconds = time.perf_counter() - start
        return report

    # -- one round ----------------------------------------------------------

    def _alloc(self, u: VertexId, v: VertexId) -> VertexId:
        z = self.dendrogram.contains_merge(u, v)
        if z is None:
            z = self.next_id
            self.next_id += 1
        return z

    def dynhac_round(
        self,
        i: int,
        V: Mapping[VertexId, int],
        E: Sequence[Edge],
        Vd: Set[VertexId],
    ) -> Tuple[Dict[VertexId, int], List[Edge], Set[VertexId], RoundReport]:
        """Apply ``(V, E, Vd)`` to round ``i`` (0-based) and return the next round's changes."""
        t0 = time.perf_counter()
        rs = self.rounds[i]
        g = rs.graph
        has_next = i + 1 < len(self.rounds)
        is_red = coloring(self.seed, i + 1)
        rr = RoundReport(round=i + 1, rule="delta" if has_next else "all", inserted=len(V), deleted=len(Vd))

        delta = update_partition(g, V, E, Vd, rs.pmap, is_red)
        rs.eligible += self._eligible_delta(g, V, delta)

        if rs.eligible == 0:
            rs.merges.clear()
            rs.vmap.clear()
            rs.preimage.clear()
            rr.terminal = True
            rr.seconds = time.perf_counter() - t0
            return {}, [], set(), rr

        members = rs.pmap.members
        if has_next:
            dirty = dirty_partitions(delta, g, is_red)
            for _, before, _ in delta.entries:
                if before is not None and before not in members:
                    rs.merges.pop(before, None)
        else:
            dirty = set(members)
            rs.merges.clear()
        ball = None
        if self.track_locality and has_next:
            ball = _k_hop_ball(g, delta, set(V) | set(Vd), 4)

        results: List[Tuple[VertexId, frozenset, SubgraphHacResult]] = []
        for p in sorted(dirty):
            h = build_partition_subgraph(g, members[p])
            rr.dirty_vertices += len(h.active)
            rr.dirty_edges += h.graph.num_edges()
            if ball is not None:
                rr.locality_violations += sum(1 for v in h.active if v not in ball)
            res = subgraph_hac(h, self.M, self.epsilon, self.floor, self._alloc, i + 1, p)
            new, reused = self.update_dendrogram(res.merges)
            rr.merges_new += new
            rr.merges_reused += reused
            if res.merges:
                rs.merges[p] = res.merges
            else:
                rs.merges.pop(p, None)
            results.append((p, h.active, res))
        rr.dirty_partitions = len(results)

        next_g = self.rounds[i + 1].graph if has_next else None
        Vd_next = self.update_vmap(i, results, Vd, next_g)
        V_next, E_next = self._next_round_changes(rs, results, next_g)
        rr.seconds = time.perf_counter() - t0
        return V_next, E_next, Vd_next, rr

    def _eligible_delta(self, g: ClusteredGraph, V: Mapping[VertexId, int], delta: DeltaP) -> int:
        floor = self.floor
        sizes = g.sizes
        removed = delta.removed
        change = 0
        for v, (sv, nbrs) in removed.items():
            for x, w in nbrs.items():
                r = removed.get(x)
                if r is not None:
                    if x < v:
                        continue
                    sx = r[0]
                else:
                    sx = sizes[x]
                if w / (sv * sx) >= floor:
                    change -= 1
        adj = g.adj
        for v in V:
            sv = sizes[v]
            for x, w in adj[v].items():
                if x in V and x < v:
                    continue
                if w / (sv * sizes[x]) >= floor:
                    change += 1
        return change

    def update_dendrogram(self, merges: Sequence[MergeRecord]) -> Tuple[int, int]:
        """Fold one partition's merges into the global dendrogram; returns (new, reused)."""
        D = self.dendrogram
        M = self.M
        new = reused = 0
        for rec in merges:
            z = D.contains_merge(rec.u, rec.v)
            if z is not None:
                if z != rec.parent:
                    raise DynHACError(f"merge ({rec.u}, {rec.v}) indexed as {z}, recorded as {rec.parent}")
                reused += 1
                continue
            for a in D.delete_ancestors((rec.u, rec.v)):
                M.pop(a, None)
            D.merge(rec.u, rec.v, rec.parent, rec.similarity)
            M[rec.parent] = min(M[rec.u], M[rec.v], rec.similarity)
            new += 1
        return new, reused

    def update_vmap(
        self,
        i: int,
        results: Sequence[Tuple[VertexId, frozenset, SubgraphHacResult]],
        Vd: Set[VertexId],
        next_g: Optional[ClusteredGraph],
    ) -> Set[VertexId]:
        """Point re-clustered vertices at their new roots; return next-round deletions.

        A next-round vertex is deleted once no vertex of this round maps to it.
        This also covers a deleted vertex whose old target is now reached by
        some other vertex (e.g. a contracted vertex that re-appears unmerged).
        """
        rs = self.rounds[i]
        vmap, preimage = rs.vmap, rs.preimage
        if next_g is None:
            vmap.clear()
            preimage.clear()
        candidates: Set[VertexId] = set()
        for v in Vd:
            old = vmap.pop(v, None)
            if old is not None:
                preimage[old].discard(v)
                candidates.add(old)
        for _, active, res in results:
            root = res.root
            for v in active:
                r = root(v)
                old = vmap.get(v)
                if old == r:
                    continue
                if old is not None:
                    preimage[old].discard(v)
                    candidates.add(old)
                vmap[v] = r
                pre = preimage.get(r)
                if pre is None:
                    preimage[r] = {v}
                else:
                    pre.add(v)
        Vd_next: Set[VertexId] = set()
        for c in candidates:
            if not preimage.get(c):
                preimage.pop(c, None)
                if next_g is not None and c in next_g.sizes:
                    Vd_next.add(c)
        return Vd_next

    def _next_round_changes(
        self,
        rs: RoundState,
        results: Sequence[Tuple[VertexId, frozenset, SubgraphHacResult]],
        next_g: Optional[ClusteredGraph],
    ) -> Tuple[Dict[VertexId, int], List[Edge]]:
        vmap = rs.vmap
        V_next: Dict[VertexId, int] = {}
        for _, _, res in results:
            hsizes = res.contracted.sizes
            for r in res.active_roots:
                if next_g is None or r not in next_g.sizes:
                    V_next[r] = hsizes[r]
        E_acc: Dict[Tuple[VertexId, VertexId], float] = {}
        for _, _, res in results:
            hc = res.contracted
            act = res.active_roots
            local: Dict[Tuple[VertexId, VertexId], float] = {}
            for a in act:
                a_new = a in V_next
                for b, w in hc.adj[a].items():
                    if b in act:
                        if a < b and (a_new or b in V_next):
                            local[(a, b)] = w
                        continue
                    b2 = vmap[b]
                    if not a_new and b2 not in V_next:
                        continue
                    if b2 == a:
                        raise DynHACError(f"boundary vertex {b} maps onto active root {a}")
                    key = (a, b2) if a < b2 else (b2, a)
                    local[key] = local.get(key, 0.0) + w
            for key, w in local.items():
                E_acc.setdefault(key, w)
        E_next = [(a, b, w) for (a, b), w in sorted(E_acc.items())]
        return V_next, E_next

    # -- validation ---------------------------------------------------------

    def _validate(self, batch: UpdateBatch) -> None:
        D = self.dendrogram
        g1 = self.rounds[0].graph if self.rounds else ClusteredGraph()
        ins = set(batch.insert)
        if len(ins) != len(batch.insert):
            raise UpdateError("duplicate vertex in insertion list")
        dels = set(batch.delete)
        if len(dels) != len(batch.delete):
            raise UpdateError("duplicate vertex in deletion list")
        for v in batch.insert:
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < LEAF_ID_LIMIT:
                raise UpdateError(f"leaf id {v!r} outside [0, 2^48)")
            if v in D.nodes:
                raise UpdateError(f"vertex {v} already present")
        for v in batch.delete:
            if v in ins:
                raise UpdateError(f"vertex {v} is both inserted and deleted")
            if v not in g1.sizes:
                raise UpdateError(f"cannot delete {v}: not a live leaf")
        for e in batch.edges:
            if len(e) != 3:
                raise UpdateError(f"malformed edge {e!r}")
            u, v, w = e
            if u == v:
                raise UpdateError(f"self-loop at {u}")
            if u not in ins and v not in ins:
                raise UpdateError(f"edge ({u}, {v}) does not touch an inserted vertex")
            for x in (u, v):
                if x in dels:
                    raise UpdateError(f"edge ({u}, {v}) touches deleted vertex {x}")
                if x not in ins and x not in g1.sizes:
                    raise UpdateError(f"edge ({u}, {v}) has unknown endpoint {x}")
            if not (isinstance(w, (int, float)) and w > 0 and math.isfinite(w)):
                raise UpdateError(f"edge ({u}, {v}) has invalid weight {w!r}")

    # -- inspection ---------------------------------------------------------

    def merge_trace(self) -> List[MergeRecord]:
        """All stored merges ordered by (round, partition, order); seq renumbered from 0."""
        out: List[MergeRecord] = []
        for rs in self.rounds:
            for r in rs.round_merges():
                out.append(MergeRecord(r.u, r.v, r.parent, r.similarity, r.round, len(out), r.partition))
        return out

    def certify(self, rel_tol: float = 1e-9) -> Verdict:
        trace = self.merge_trace()
        g1 = self.rounds[0].graph if self.rounds else ClusteredGraph()
        return certify(g1, trace, self.epsilon, self.threshold, None, True, rel_tol)

    def flatten(self, theta: float) -> Dict[VertexId, VertexId]:
        return self.dendrogram.flatten(theta)

    def check_invariants(self, full: bool = True) -> None:
        """Raise ``DynHACError`` if any maintained structure is inconsistent.

        With ``full`` every partition map is also compared with a from-scratch
        recomputation.
        """
        D = self.dendrogram
        D.check_invariants()
        if not self.rounds:
            if D.nodes or self.M:
                raise DynHACError("empty state with a non-empty dendrogram")
            return
        parents: Set[VertexId] = set()
        last = len(self.rounds) - 1
        for i, rs in enumerate(self.rounds):
            g = rs.graph
            g.check_invariants()
            if not g.sizes:
                raise DynHACError(f"round {i + 1} is empty")
            for v in g.sizes:
                if v not in D.nodes or v not in self.M:
                    raise DynHACError(f"round {i + 1} vertex {v} missing from dendrogram or M")
                if D.nodes[v].size != g.sizes[v]:
                    raise DynHACError(f"size of {v} disagrees with dendrogram")
            count = sum(1 for a, b, w in g.edges() if w / (g.sizes[a] * g.sizes[b]) >= self.floor)
            if count != rs.eligible:
                raise DynHACError(f"round {i + 1} eligible count {rs.eligible} != {count}")
            if set(rs.pmap.pid) != set(g.sizes):
                raise DynHACError(f"round {i + 1} partition map does not cover the graph")
            if full:
                fresh = PartitionMap.build(g, coloring(self.seed, i + 1))
                if fresh.pid != rs.pmap.pid:
                    raise DynHACError(f"round {i + 1} partition ids differ from recomputation")
            if i == last:
                if rs.eligible:
                    raise DynHACError("last round still has eligible edges")
                if rs.merges or rs.vmap:
                    raise DynHACError("last round stores merges")
                if set(D.roots()) != set(g.sizes):
                    raise DynHACError("dendrogram roots differ from last round vertices")
                continue
            nxt = self.rounds[i + 1].graph
            if set(rs.vmap) != set(g.sizes):
                raise DynHACError(f"round {i + 1} vertex map does not cover the graph")
            pre: Dict[VertexId, Set[VertexId]] = {}
            for v, r in rs.vmap.items():
                pre.setdefault(r, set()).add(v)
            if pre != rs.preimage:
                raise DynHACError(f"round {i + 1} preimage index out of sync")
            if set(pre) != set(nxt.sizes):
                raise DynHACError(f"round {i + 1} vertex map image differs from round {i + 2}")
            replay = g.copy()
            for p, recs in rs.merges.items():
                if p not in rs.pmap.members:
                    raise DynHACError(f"round {i + 1} stores merges of vanished partition {p}")
                for rec in recs:
                    if rs.pmap.pid.get(rec.u, p) != p or rs.pmap.pid.get(rec.v, p) != p:
                        raise DynHACError(f"merge {rec} crosses partitions")
                    if D.contains_merge(rec.u, rec.v) != rec.parent:
                        raise DynHACError(f"merge {rec} missing from dendrogram")
                    replay.contract(rec.u, rec.v, rec.parent)
                    parents.add(rec.parent)
            for v, r in rs.vmap.items():
                x = v
                while x not in replay.sizes:
                    x = D.nodes[x].parent
                if x != r:
                    raise DynHACError(f"round {i + 1} maps {v} to {r}, merges give {x}")
            if not replay.same_as(nxt):
                raise DynHACError(f"round {i + 2} graph differs from contracted round {i + 1}")
        internal = {n.id for n in D.internal_nodes()}
        if internal != parents:
            raise DynHACError("dendrogram internal nodes differ from stored merges")
        if set(D.leaves()) != set(self.rounds[0].graph.sizes):
            raise DynHACError("dendrogram leaves differ from the leaf graph")
        for v, node in D.nodes.items():
            m = self.M.get(v)
            if m is None or not (m == node.min_merge or math.isclose(m, node.min_merge, rel_tol=1e-9)):
                raise DynHACError(f"M({v}) = {m!r} disagrees with dendrogram")
        if set(self.M) != set(D.nodes):
            raise DynHACError("M has entries for ids outside the dendrogram")

    # -- snapshot -----------------------------------------------------------

    def to_dict(self) -> dict:
        D = self.dendrogram
        leaves = sorted(D.leaves())
        internal = sorted(
            [n.id, n.children[0], n.children[1], n.similarity] for n in D.internal_nodes()
        )
        rounds = []
        for rs in self.rounds:
            g = rs.graph
            rounds.append(
                {
                    "sizes": sorted([v, s] for v, s in g.sizes.items()),
                    "edges": sorted([u, v, w] for u, v, w in g.edges()),
                    "pid": sorted([v, p] for v, p in rs.pmap.pid.items()),
                    "vmap": sorted([v, r] for v, r in rs.vmap.items()),
                    "merges": [
                        [p, [[m.u, m.v, m.parent, m.similarity] for m in rs.merges[p]]]
                        for p in sorted(rs.merges)
                    ],
                    "eligible": rs.eligible,
                }
            )
        return {
            "version": SNAPSHOT_VERSION,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "seed": self.seed,
            "next_id": self.next_id,
            "leaves": leaves,
            "internal": internal,
            "min_merge": sorted([v, None if math.isinf(m) else m] for v, m in self.M.items()),
            "rounds": rounds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynHAC":
        if not isinstance(data, dict) or data.get("version") != SNAPSHOT_VERSION:
            found = data.get("version") if isinstance(data, dict) else None
            raise SnapshotError(f"unsupported snapshot version {found!r}, expected {SNAPSHOT_VERSION!r}")
        try:
            eng = cls(data["epsilon"], data["threshold"], data["seed"])
            eng.next_id = int(data["next_id"])
            D = eng.dendrogram
            D.add_leaves(data["leaves"])
            pending = {row[0]: row for row in data["internal"]}
            # children before parents: repeatedly merge nodes whose children exist
            while pending:
                ready = [z for z, (_, a, b, _s) in pending.items() if a in D.nodes and b in D.nodes]
                if not ready:
                    raise SnapshotError("dendrogram has dangling children")
                for z in sorted(ready):
                    _, a, b, s = pending.pop(z)
                    D.merge(a, b, z, s)
            eng.M = {v: math.inf if m is None else m for v, m in data["min_merge"]}
            for i, rd in enumerate(data["rounds"]):
                rs = RoundState()
                g = rs.graph
                for v, s in rd["sizes"]:
                    g.add_vertex(v, s)
                for u, v, w in rd["edges"]:
                    g.add_edge(u, v, w)
                for v, p in rd["pid"]:
                    rs.pmap.assign(v, p)
                for v, r in rd["vmap"]:
                    rs.vmap[v] = r
                    rs.preimage.setdefault(r, set()).add(v)
                for p, recs in rd["merges"]:
                    rs.merges[p] = [
                        MergeRecord(u, v, z, s, i + 1, k, p) for k, (u, v, z, s) in enumerate(recs)
                    ]
                rs.eligible = rd["eligible"]
                eng.rounds.append(rs)
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError, DynHACError) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from exc
        return eng


def _k_hop_ball(g: ClusteredGraph, delta: DeltaP, seeds: Set[VertexId], k: int) -> Set[VertexId]:
    """Vertices within ``k`` hops of ``seeds`` in the updated graph plus deleted vertices' edges."""
    removed = delta.removed
    seen = set(seeds)
    frontier = deque((s, 0) for s in seeds)
    while frontier:
        x, d = frontier.popleft()
        if d == k:
            continue
        nbrs = g.adj.get(x)
        if nbrs is None:
            nbrs = removed[x][1] if x in removed else {}
        for y in nbrs:
            if y not in seen:
                seen.add(y)
                frontier.append((y, d + 1))
    return seen
