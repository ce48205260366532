"""Global merge forest with merge reuse and flat-cut extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple

from .errors import (
    DendrogramError,
    DuplicateMergeError,
    IdCollisionError,
    LeafHasParentError,
    NonRootError,
    UnknownVertexError,
)

VertexId = int


def pair_key(u: VertexId, v: VertexId) -> Tuple[VertexId, VertexId]:
    return (u, v) if u < v else (v, u)


@dataclass(slots=True)
class DendroNode:
    id: VertexId
    children: Optional[Tuple[VertexId, VertexId]] = None
    parent: Optional[VertexId] = None
    similarity: Optional[float] = None
    min_merge: float = math.inf
    size: int = 1

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class Dendrogram:
    """Binary merge forest.

    ``merge_index`` maps the unordered child pair of every internal node to
    that node, which is how a re-run that reproduces an old merge gets to
    keep the old node id.
    """

    def __init__(self) -> None:
        self.nodes: Dict[VertexId, DendroNode] = {}
        self.merge_index: Dict[Tuple[VertexId, VertexId], VertexId] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, v: object) -> bool:
        return v in self.nodes

    def __getitem__(self, v: VertexId) -> DendroNode:
        try:
            return self.nodes[v]
        except KeyError:
            raise UnknownVertexError(v) from None

    def add_leaves(self, ids: Iterable[VertexId]) -> None:
        ids = list(ids)
        if len(set(ids)) != len(ids):
            raise IdCollisionError("duplicate ids in leaf batch")
        for v in ids:
            if v in self.nodes:
                raise IdCollisionError(v)
        for v in ids:
            self.nodes[v] = DendroNode(v)

    def merge(self, u: VertexId, v: VertexId, parent_id: VertexId, similarity: float) -> VertexId:
        nu, nv = self[u], self[v]
        key = pair_key(u, v)
        if key in self.merge_index:
            raise DuplicateMergeError(key)
        if nu.parent is not None:
            raise NonRootError(u)
        if nv.parent is not None:
            raise NonRootError(v)
        if u == v:
            raise DendrogramError(f"cannot merge {u} with itself")
        if parent_id in self.nodes:
            raise IdCollisionError(parent_id)
        self.nodes[parent_id] = DendroNode(
            parent_id,
            children=key,
            similarity=similarity,
            min_merge=min(nu.min_merge, nv.min_merge, similarity),
            size=nu.size + nv.size,
        )
        nu.parent = parent_id
        nv.parent = parent_id
        self.merge_index[key] = parent_id
        return parent_id

    def contains_merge(self, u: VertexId, v: VertexId) -> Optional[VertexId]:
        return self.merge_index.get(pair_key(u, v))

    def delete_ancestors(self, vs: Iterable[VertexId]) -> Set[VertexId]:
        """Remove every strict ancestor of ``vs``; returns the removed ids."""
        nodes = self.nodes
        removed: Set[VertexId] = set()
        for v in vs:
            p = self[v].parent
            while p is not None and p not in removed:
                removed.add(p)
                p = nodes[p].parent
        for a in removed:
            node = nodes.pop(a)
            del self.merge_index[node.children]
            for c in node.children:
                child = nodes.get(c)
                if child is not None:
                    child.parent = None
        return removed

    def remove_leaves(self, vs: Iterable[VertexId]) -> None:
        vs = list(vs)
        for v in vs:
            node = self[v]
            if not node.is_leaf:
                raise DendrogramError(f"{v} is not a leaf")
            if node.parent is not None:
                raise LeafHasParentError(v)
        for v in vs:
            del self.nodes[v]

    # -- queries ------------------------------------------------------------

    def roots(self) -> List[VertexId]:
        return [v for v, n in self.nodes.items() if n.parent is None]

    def leaves(self) -> List[VertexId]:
        return [v for v, n in self.nodes.items() if n.children is None]

    def internal_nodes(self) -> Iterator[DendroNode]:
        return (n for n in self.nodes.values() if n.children is not None)

    def root_of(self, v: VertexId) -> VertexId:
        nodes = self.nodes
        while nodes[v].parent is not None:
            v = nodes[v].parent
        return v

    def leaf_descendants(self, v: VertexId) -> List[VertexId]:
        out = []
        stack = [v]
        nodes = self.nodes
        while stack:
            x = stack.pop()
            ch = nodes[x].children
            if ch is None:
                out.append(x)
            else:
                stack.extend(ch)
        return out

    def flatten(self, theta: float) -> Dict[VertexId, VertexId]:
        """Cut at ``theta``: label every leaf with its cluster representative.

        Two leaves end up together iff every internal node on the tree path
        between them merged at similarity ``>= theta``.
        """
        parent: Dict[VertexId, VertexId] = {}

        def find(x: VertexId) -> VertexId:
            root = x
            while root in parent:
                root = parent[root]
            while x != root:
                nxt = parent[x]
                parent[x] = root
                x = nxt
            return root

        for n in self.nodes.values():
            if n.children is not None and n.similarity >= theta:
                r = find(n.id)
                for c in n.children:
                    rc = find(c)
                    if rc != r:
                        parent[rc] = r
        return {v: find(v) for v, n in self.nodes.items() if n.children is None}

    def check_invariants(self) -> None:
        """Recompute parent links, sizes, M and the merge index from scratch."""
        nodes = self.nodes
        seen_index = {}
        for n in nodes.values():
            if n.parent is not None:
                p = nodes.get(n.parent)
                if p is None or n.id not in (p.children or ()):
                    raise DendrogramError(f"broken parent link at {n.id}")
            if n.children is None:
                if n.min_merge != math.inf or n.size != 1:
                    raise DendrogramError(f"bad leaf fields at {n.id}")
                continue
            a, b = (nodes.get(c) for c in n.children)
            if a is None or b is None or a.parent != n.id or b.parent != n.id:
                raise DendrogramError(f"broken child link at {n.id}")
            if n.size != a.size + b.size:
                raise DendrogramError(f"size mismatch at {n.id}")
            if n.min_merge != min(a.min_merge, b.min_merge, n.similarity):
                raise DendrogramError(f"min-merge mismatch at {n.id}")
            seen_index[pair_key(*n.children)] = n.id
        if seen_index != self.merge_index:
            raise DendrogramError("merge index out of sync with internal nodes")
