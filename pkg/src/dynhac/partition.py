"""Red/blue partitioning, incremental partition ids and dirty-partition detection.

A vertex belongs to its own partition when it is red or has no red
neighbour; a blue vertex with red neighbours joins the partition of the
heaviest one (normalized weight, smallest id on ties).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Set, Tuple

from .errors import UnknownVertexError, UpdateError
from .graph import ClusteredGraph, VertexId

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

IsRed = Callable[[VertexId], bool]


class Color(enum.Enum):
    RED = "red"
    BLUE = "blue"


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def round_key(seed: int, round_index: int = 0) -> int:
    return splitmix64(splitmix64(seed & _MASK64) ^ (round_index & _MASK64))


def color(seed: int, v: VertexId, round_index: int = 0) -> Color:
    """Deterministic fair coin per ``(seed, round, vertex)``."""
    return Color.RED if is_red_keyed(round_key(seed, round_index), v) else Color.BLUE


def is_red_keyed(key: int, v: VertexId) -> bool:
    return splitmix64(key ^ (v & _MASK64)) >> 63 == 0


def coloring(seed: int, round_index: int = 0) -> IsRed:
    key = round_key(seed, round_index)
    return lambda v: is_red_keyed(key, v)


def compute_pid(g: ClusteredGraph, is_red: IsRed, v: VertexId) -> VertexId:
    if v not in g.sizes:
        raise UnknownVertexError(v)
    if is_red(v):
        return v
    sizes = g.sizes
    sv = sizes[v]
    best = v
    best_w = -1.0
    for x, w in g.adj[v].items():
        if not is_red(x):
            continue
        s = w / (sv * sizes[x])
        if s > best_w or (s == best_w and x < best):
            best, best_w = x, s
    return best


class PartitionMap:
    """Partition id of every vertex plus the member set of every partition."""

    __slots__ = ("pid", "members")

    def __init__(self) -> None:
        self.pid: Dict[VertexId, VertexId] = {}
        self.members: Dict[VertexId, Set[VertexId]] = {}

    def assign(self, v: VertexId, p: VertexId) -> None:
        old = self.pid.get(v)
        if old == p:
            return
        if old is not None:
            self._drop(v, old)
        self.pid[v] = p
        self.members.setdefault(p, set()).add(v)

    def remove(self, v: VertexId) -> Optional[VertexId]:
        old = self.pid.pop(v, None)
        if old is not None:
            self._drop(v, old)
        return old

    def _drop(self, v: VertexId, p: VertexId) -> None:
        group = self.members[p]
        group.discard(v)
        if not group:
            del self.members[p]

    def copy(self) -> "PartitionMap":
        pm = PartitionMap()
        pm.pid = dict(self.pid)
        pm.members = {p: set(m) for p, m in self.members.items()}
        return pm

    @classmethod
    def build(cls, g: ClusteredGraph, is_red: IsRed) -> "PartitionMap":
        pm = cls()
        for v in g.sizes:
            pm.assign(v, compute_pid(g, is_red, v))
        return pm


@dataclass
class DeltaP:
    """Partition ids before/after an update; ``None`` means absent on that side.

    ``removed`` keeps the size and adjacency of every deleted vertex as it
    was just before deletion.
    """

    entries: List[Tuple[VertexId, Optional[VertexId], Optional[VertexId]]] = field(default_factory=list)
    removed: Dict[VertexId, Tuple[int, Dict[VertexId, float]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def changed(self) -> List[VertexId]:
        return [v for v, a, b in self.entries if a != b]


def update_partition(
    g: ClusteredGraph,
    inserted: Mapping[VertexId, int],
    edges: Iterable[Tuple[VertexId, VertexId, float]],
    deleted: Iterable[VertexId],
    pmap: PartitionMap,
    is_red: IsRed,
) -> DeltaP:
    """Apply an update to ``g`` and repair ``pmap`` locally.

    Only the inserted vertices, their neighbours after the update, and the
    surviving neighbours of deleted vertices are re-examined. Every inserted
    edge must touch an inserted vertex and no deleted one.
    """
    deleted = set(deleted)
    edges = list(edges)
    for v in deleted:
        if v not in g.sizes:
            raise UnknownVertexError(v)
        if v in inserted:
            raise UpdateError(f"vertex {v} is both inserted and deleted")
    for v in inserted:
        if v in g.sizes:
            raise UpdateError(f"vertex {v} already present")
    affected: Set[VertexId] = set(inserted)
    for u, v, _ in edges:
        if u not in inserted and v not in inserted:
            raise UpdateError(f"edge ({u}, {v}) does not touch an inserted vertex")
        if u in deleted or v in deleted:
            raise UpdateError(f"edge ({u}, {v}) touches a deleted vertex")
        affected.add(u)
        affected.add(v)
    for v in deleted:
        affected.update(g.adj[v])
    affected -= deleted

    delta = DeltaP()
    before = {v: pmap.pid.get(v) for v in affected}
    for v in sorted(deleted):
        size = g.sizes[v]
        delta.removed[v] = (size, g.remove_vertex(v))
        delta.entries.append((v, pmap.remove(v), None))
    for v, s in inserted.items():
        g.add_vertex(v, s)
    for u, v, w in edges:
        g.add_edge(u, v, w)
    for v in sorted(affected):
        p = compute_pid(g, is_red, v)
        pmap.assign(v, p)
        delta.entries.append((v, before[v], p))
    return delta


def dirty_partitions(delta: DeltaP, g_after: ClusteredGraph, is_red: IsRed) -> Set[VertexId]:
    dirty: Set[VertexId] = set()
    for _, p, p_new in delta.entries:
        if p_new is not None:
            dirty.add(p_new)
        if p is not None and p in g_after.sizes and is_red(p):
            dirty.add(p)
    return dirty
