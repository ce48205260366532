"""Weighted graph whose vertices are clusters.

Every vertex carries a size (number of leaves it contains) and every edge a
raw similarity ``w``. Average linkage between two clusters is the raw weight
divided by the product of the sizes, see :meth:`ClusteredGraph.normalized_weight`.
"""

from __future__ import annotations

from typing import Dict, Iterable, Iterator, Tuple

from .errors import (
    DuplicateVertexError,
    GraphError,
    IdCollisionError,
    MissingEdgeError,
    SelfLoopError,
    UnknownVertexError,
)

VertexId = int
Edge = Tuple[VertexId, VertexId, float]


class ClusteredGraph:
    """Undirected graph with vertex sizes and summed parallel edges.

    Adjacency is stored symmetrically: ``adj[u][v] == adj[v][u]``.
    """

    __slots__ = ("sizes", "adj")

    def __init__(self) -> None:
        self.sizes: Dict[VertexId, int] = {}
        self.adj: Dict[VertexId, Dict[VertexId, float]] = {}

    @classmethod
    def from_edges(cls, vertices: Iterable[VertexId], edges: Iterable[Edge], sizes=None) -> "ClusteredGraph":
        g = cls()
        for v in vertices:
            g.add_vertex(v, 1 if sizes is None else sizes.get(v, 1))
        for u, v, w in edges:
            g.add_edge(u, v, w)
        return g

    def __contains__(self, v: object) -> bool:
        return v in self.sizes

    def __len__(self) -> int:
        return len(self.sizes)

    def __repr__(self) -> str:
        return f"ClusteredGraph(n={len(self.sizes)}, m={self.num_edges()})"

    def vertices(self) -> Iterator[VertexId]:
        return iter(self.sizes)

    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adj.values()) // 2

    def edges(self) -> Iterator[Edge]:
        """Yield every edge once as ``(u, v, w)`` with ``u < v``."""
        for u, nbrs in self.adj.items():
            for v, w in nbrs.items():
                if u < v:
                    yield u, v, w

    def degree(self, v: VertexId) -> int:
        try:
            return len(self.adj[v])
        except KeyError:
            raise UnknownVertexError(v) from None

    def neighbors(self, v: VertexId) -> Dict[VertexId, float]:
        try:
            return self.adj[v]
        except KeyError:
            raise UnknownVertexError(v) from None

    def size(self, v: VertexId) -> int:
        try:
            return self.sizes[v]
        except KeyError:
            raise UnknownVertexError(v) from None

    def total_size(self) -> int:
        return sum(self.sizes.values())

    def weight(self, u: VertexId, v: VertexId) -> float:
        try:
            return self.adj[u][v]
        except KeyError:
            if u not in self.sizes:
                raise UnknownVertexError(u) from None
            raise MissingEdgeError((u, v)) from None

    def normalized_weight(self, u: VertexId, v: VertexId) -> float:
        """Average-linkage similarity ``w(u,v) / (S(u) * S(v))``."""
        return self.weight(u, v) / (self.sizes[u] * self.sizes[v])

    def wmax(self, v: VertexId, floor: float = 0.0) -> float:
        """Largest normalized weight at ``v`` among edges at or above ``floor``.

        Returns 0 when no incident edge qualifies.
        """
        nbrs = self.neighbors(v)
        sv = self.sizes[v]
        sizes = self.sizes
        best = 0.0
        for x, w in nbrs.items():
            s = w / (sv * sizes[x])
            if s >= floor and s > best:
                best = s
        return best

    # -- mutation ---------------------------------------------------------

    def add_vertex(self, v: VertexId, size: int = 1) -> None:
        if v in self.sizes:
            raise DuplicateVertexError(v)
        if size < 1:
            raise GraphError(f"vertex {v} must have positive size, got {size}")
        self.sizes[v] = size
        self.adj[v] = {}

    def add_edge(self, u: VertexId, v: VertexId, w: float) -> float:
        """Insert edge ``(u, v)`` or add ``w`` to its existing weight.

        Returns the resulting weight.
        """
        if u == v:
            raise SelfLoopError(u)
        if not w > 0:
            raise GraphError(f"edge ({u}, {v}) must have positive weight, got {w!r}")
        adj = self.adj
        if u not in adj:
            raise UnknownVertexError(u)
        if v not in adj:
            raise UnknownVertexError(v)
        total = adj[u].get(v, 0.0) + w
        adj[u][v] = total
        adj[v][u] = total
        return total

    def remove_vertex(self, v: VertexId) -> Dict[VertexId, float]:
        """Delete ``v`` with its incident edges; returns its old adjacency."""
        try:
            nbrs = self.adj.pop(v)
        except KeyError:
            raise UnknownVertexError(v) from None
        del self.sizes[v]
        adj = self.adj
        for x in nbrs:
            del adj[x][v]
        return nbrs

    def contract(self, u: VertexId, v: VertexId, new_id: VertexId) -> VertexId:
        """Merge ``u`` and ``v`` into ``new_id``; parallel edges are summed."""
        adj = self.adj
        if u not in adj:
            raise UnknownVertexError(u)
        if v not in adj[u]:
            raise MissingEdgeError((u, v))
        if new_id in adj:
            raise IdCollisionError(new_id)
        au = adj.pop(u)
        av = adj.pop(v)
        del au[v]
        del av[u]
        # fold the smaller neighbor map into the larger one
        if len(au) < len(av):
            au, av = av, au
        merged = au
        for x, w in av.items():
            merged[x] = merged.get(x, 0.0) + w
        for x, w in merged.items():
            ax = adj[x]
            ax.pop(u, None)
            ax.pop(v, None)
            ax[new_id] = w
        adj[new_id] = merged
        sizes = self.sizes
        sizes[new_id] = sizes.pop(u) + sizes.pop(v)
        return new_id

    def copy(self) -> "ClusteredGraph":
        g = ClusteredGraph()
        g.sizes = dict(self.sizes)
        g.adj = {v: dict(nbrs) for v, nbrs in self.adj.items()}
        return g

    def check_invariants(self) -> None:
        """Raise ``GraphError`` if symmetry, positivity or size rules are broken."""
        if self.sizes.keys() != self.adj.keys():
            raise GraphError("size and adjacency maps disagree on the vertex set")
        for v, s in self.sizes.items():
            if s < 1:
                raise GraphError(f"vertex {v} has size {s}")
        for u, nbrs in self.adj.items():
            if u in nbrs:
                raise GraphError(f"self-loop at {u}")
            for v, w in nbrs.items():
                if not w > 0:
                    raise GraphError(f"non-positive weight on ({u}, {v})")
                if self.adj.get(v, {}).get(u) != w:
                    raise GraphError(f"asymmetric edge ({u}, {v})")

    def same_as(self, other: "ClusteredGraph", rel_tol: float = 1e-9) -> bool:
        """Vertex ids, sizes and edge weights agree (weights up to ``rel_tol``)."""
        if self.sizes != other.sizes:
            return False
        for u, nbrs in self.adj.items():
            onbrs = other.adj[u]
            if nbrs.keys() != onbrs.keys():
                return False
            for v, w in nbrs.items():
                if abs(w - onbrs[v]) > rel_tol * max(abs(w), abs(onbrs[v])):
                    return False
        return True
