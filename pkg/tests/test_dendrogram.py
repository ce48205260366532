import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from dynhac.dendrogram import Dendrogram
from dynhac.errors import (
    DuplicateMergeError,
    IdCollisionError,
    LeafHasParentError,
    NonRootError,
    UnknownVertexError,
)


def test_add_leaves():
    d = Dendrogram()
    d.add_leaves([1, 2])
    assert sorted(d.roots()) == [1, 2] and sorted(d.leaves()) == [1, 2]
    d.add_leaves([])
    assert len(d) == 2
    with pytest.raises(IdCollisionError):
        d.add_leaves([2])
    assert d[1].min_merge == math.inf and d[1].size == 1


def test_merge_fields():
    d = Dendrogram()
    d.add_leaves([1, 2, 3])
    p = d.merge(1, 2, 10, 0.9)
    assert p == 10 and d[10].min_merge == 0.9 and d[10].size == 2
    d.merge(10, 3, 11, 0.3)
    assert d[11].min_merge == 0.3 and d[11].size == 3
    d.check_invariants()


def test_merge_errors():
    d = Dendrogram()
    d.add_leaves([1, 2, 3])
    d.merge(1, 2, 10, 0.5)
    with pytest.raises(DuplicateMergeError):
        d.merge(2, 1, 12, 0.5)
    with pytest.raises(NonRootError):
        d.merge(1, 3, 12, 0.5)
    with pytest.raises(IdCollisionError):
        d.merge(10, 3, 2, 0.5)


def test_contains_merge_and_delete_ancestors():
    d = Dendrogram()
    d.add_leaves(["a", "b", "c"])
    d.merge("a", "b", "p", 0.9)
    assert d.contains_merge("b", "a") == "p"
    assert d.contains_merge("a", "c") is None
    d.delete_ancestors({"a"})
    assert d.contains_merge("a", "b") is None
    assert sorted(d.roots()) == ["a", "b", "c"]


def test_delete_ancestors_chain():
    d = Dendrogram()
    d.add_leaves([1, 2, 3])
    d.merge(1, 2, 10, 0.9)
    d.merge(10, 3, 11, 0.5)
    removed = d.delete_ancestors({1, 2})
    assert removed == {10, 11}
    assert sorted(d.roots()) == [1, 2, 3]
    assert d.delete_ancestors({3}) == set()
    with pytest.raises(UnknownVertexError):
        d.delete_ancestors({99})
    d.check_invariants()


def test_remove_leaves():
    d = Dendrogram()
    d.add_leaves([1, 2, 3])
    d.remove_leaves([3])
    assert len(d) == 2
    d.merge(1, 2, 10, 0.5)
    with pytest.raises(LeafHasParentError):
        d.remove_leaves([1])
    d.remove_leaves([])
    assert len(d) == 3


def test_flatten_examples():
    d = Dendrogram()
    d.add_leaves(["a", "b", "c"])
    d.merge("a", "b", "ab", 0.9)
    d.merge("ab", "c", "abc", 0.3)
    f = d.flatten(0.5)
    assert f["a"] == f["b"] != f["c"]
    f = d.flatten(0.0)
    assert len(set(f.values())) == 1
    f = d.flatten(5.0)
    assert len(set(f.values())) == 3


def _random_dendrogram(rng, n):
    d = Dendrogram()
    d.add_leaves(range(n))
    roots = list(range(n))
    nid = n
    while len(roots) > 1 and rng.random() < 0.97:
        a, b = rng.sample(roots, 2)
        d.merge(a, b, nid, rng.choice([0.1, 0.4, 0.5, 0.8, rng.random()]))
        roots.remove(a)
        roots.remove(b)
        roots.append(nid)
        nid += 1
    return d


def _path_ok(d, x, y, theta):
    def chain(v):
        out = [v]
        while d[v].parent is not None:
            v = d[v].parent
            out.append(v)
        return out

    cx, cy = chain(x), chain(y)
    common = set(cx) & set(cy)
    if not common:
        return False
    lca = next(v for v in cx if v in common)
    path = cx[: cx.index(lca) + 1] + cy[: cy.index(lca)]
    return all(d[v].similarity >= theta for v in path if not d[v].is_leaf)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 50), st.sampled_from([0.0, 0.3, 0.45, 0.5, 0.9]))
def test_flatten_matches_pairwise_path_rule(seed, n, theta):
    rng = random.Random(seed)
    d = _random_dendrogram(rng, n)
    f = d.flatten(theta)
    leaves = d.leaves()
    for i, x in enumerate(leaves):
        for y in leaves[i + 1:]:
            assert (f[x] == f[y]) == _path_ok(d, x, y, theta)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_invariants_survive_random_operations(seed):
    rng = random.Random(seed)
    d = _random_dendrogram(rng, 30)
    for _ in range(10):
        vs = rng.sample(list(d.nodes), 3)
        removed = d.delete_ancestors(vs)
        assert not removed & set(d.nodes)
        d.check_invariants()
        roots = d.roots()
        if len(roots) > 1:
            a, b = rng.sample(roots, 2)
            d.merge(a, b, 1000 + len(d.nodes) + rng.randrange(10**6), rng.random())
            d.check_invariants()


def test_merge_index_tracks_internal_nodes():
    d = _random_dendrogram(random.Random(1), 20)
    idx = {tuple(sorted(n.children)): n.id for n in d.internal_nodes()}
    assert idx == d.merge_index
