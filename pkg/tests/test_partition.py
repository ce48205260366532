import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from dynhac.errors import UnknownVertexError, UpdateError
from dynhac.graph import ClusteredGraph
from dynhac.partition import (
    Color,
    DeltaP,
    PartitionMap,
    color,
    coloring,
    compute_pid,
    dirty_partitions,
    update_partition,
)
from dynhac.subgraph import build_partition_subgraph
from conftest import random_graph


def _ids_with(is_red, want_red, count, start=0):
    out = []
    v = start
    while len(out) < count:
        if is_red(v) == want_red:
            out.append(v)
        v += 1
    return out


def test_color_deterministic():
    assert color(7, 12345) == color(7, 12345)
    assert color(7, 12345, 3) == color(7, 12345, 3)
    assert coloring(7)(12345) == (color(7, 12345) is Color.RED)


def test_color_balance():
    rng = random.Random(0)
    ids = rng.sample(range(1 << 40), 10_000)
    is_red = coloring(0)
    frac = sum(map(is_red, ids)) / len(ids)
    assert 0.45 <= frac <= 0.55


def test_color_seed_avalanche():
    ids = range(100)
    for s in range(20):
        a, b = coloring(s), coloring(s + 1)
        assert any(a(v) != b(v) for v in ids)
        assert any(coloring(s, 1)(v) != a(v) for v in ids)


def test_compute_pid_examples():
    is_red = coloring(0)
    r1, r2 = _ids_with(is_red, True, 2)
    (b,) = _ids_with(is_red, False, 1)
    (b2,) = _ids_with(is_red, False, 1, start=b + 1)
    g = ClusteredGraph.from_edges([r1, r2, b, b2], [(b, r1, 0.9), (b, r2, 0.4), (b2, b, 1.0)])
    assert compute_pid(g, is_red, r1) == r1
    assert compute_pid(g, is_red, b) == r1
    g2 = ClusteredGraph.from_edges([b, b2], [(b, b2, 1.0)])
    assert compute_pid(g2, is_red, b) == b
    with pytest.raises(UnknownVertexError):
        compute_pid(g, is_red, 10**9)


def test_compute_pid_tie_smallest_id():
    is_red = coloring(0)
    r1, r2 = _ids_with(is_red, True, 2)
    (b,) = _ids_with(is_red, False, 1)
    g = ClusteredGraph.from_edges([r1, r2, b], [(b, r2, 0.5), (b, r1, 0.5)])
    assert compute_pid(g, is_red, b) == min(r1, r2)


def test_compute_pid_uses_normalized_weight():
    is_red = coloring(0)
    r1, r2 = _ids_with(is_red, True, 2)
    (b,) = _ids_with(is_red, False, 1)
    g = ClusteredGraph.from_edges([r1, r2, b], [(b, r1, 3.0), (b, r2, 2.0)], sizes={r1: 4, r2: 1, b: 1})
    assert compute_pid(g, is_red, b) == r2


def test_update_insert_isolated():
    is_red = coloring(0)
    g = ClusteredGraph()
    pm = PartitionMap()
    delta = update_partition(g, {5: 1}, [], [], pm, is_red)
    assert delta.entries == [(5, None, 5)]
    assert pm.pid == {5: 5}


def test_update_insert_blue_next_to_red():
    is_red = coloring(0)
    (r,) = _ids_with(is_red, True, 1)
    x, y = _ids_with(is_red, False, 2)
    g = ClusteredGraph.from_edges([r, y], [(r, y, 0.2)])
    pm = PartitionMap.build(g, is_red)
    delta = update_partition(g, {x: 1}, [(x, r, 0.7), (x, y, 0.1)], [], pm, is_red)
    entries = {v: (a, b) for v, a, b in delta.entries}
    assert entries[x] == (None, r)
    assert entries[r] == (r, r)
    assert y in entries
    assert dirty_partitions(delta, g, is_red) == {r}


def test_update_precondition_errors():
    is_red = coloring(0)
    g = ClusteredGraph.from_edges([1, 2], [(1, 2, 1.0)])
    pm = PartitionMap.build(g, is_red)
    with pytest.raises(UpdateError):
        update_partition(g, {3: 1}, [(3, 1, 1.0)], [1], pm, is_red)
    with pytest.raises(UpdateError):
        update_partition(g, {}, [(1, 2, 1.0)], [], pm, is_red)
    with pytest.raises(UnknownVertexError):
        update_partition(g, {}, [], [99], pm, is_red)
    with pytest.raises(UpdateError):
        update_partition(g, {1: 1}, [], [], pm, is_red)


def test_dirty_partitions_examples():
    is_red = coloring(0)
    r1, r2 = _ids_with(is_red, True, 2)
    (b,) = _ids_with(is_red, False, 1)
    g = ClusteredGraph.from_edges([r1, r2], [])
    assert dirty_partitions(DeltaP([(99, None, r1)]), g, is_red) == {r1}
    assert dirty_partitions(DeltaP([(99, r1, r2)]), g, is_red) == {r1, r2}
    assert dirty_partitions(DeltaP([(b, b, None)]), g, is_red) == set()
    # a red pid that vanished from the graph is not reported
    g.remove_vertex(r1)
    assert dirty_partitions(DeltaP([(99, r1, r2)]), g, is_red) == {r2}


def _snapshot(g, pm):
    out = {}
    for p, members in pm.members.items():
        h = build_partition_subgraph(g, members)
        edges = Counter()
        for v in members:
            for x, w in h.graph.adj[v].items():
                edges[(min(v, x), max(v, x), w, g.sizes[v], g.sizes[x])] += 1
        out[p] = (frozenset(members), edges)
    return out


def _random_update(rng, g, next_id):
    vs = list(g.sizes)
    inserted, edges, deleted = {}, [], []
    if vs and rng.random() < 0.4:
        deleted = rng.sample(vs, min(len(vs), rng.randint(1, 2)))
    survivors = [v for v in vs if v not in deleted]
    for _ in range(rng.randint(0 if deleted else 1, 2)):
        x = next_id
        next_id += 1
        inserted[x] = rng.randint(1, 3)
        for y in rng.sample(survivors, min(len(survivors), rng.randint(0, 4))):
            edges.append((x, y, rng.uniform(0.05, 2.0)))
        survivors.append(x)
    return inserted, edges, deleted, next_id


def _ball(g_before, g_after, seeds, k):
    def nbrs(v):
        out = set()
        if v in g_before.adj:
            out |= set(g_before.adj[v])
        if v in g_after.adj:
            out |= set(g_after.adj[v])
        return out

    seen = set(seeds)
    frontier = set(seeds)
    for _ in range(k):
        frontier = {y for x in frontier for y in nbrs(x)} - seen
        seen |= frontier
    return seen


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_incremental_pids_match_brute_force(seed):
    rng = random.Random(seed)
    is_red = coloring(seed)
    g = random_graph(rng, rng.randint(5, 40), 0.15)
    pm = PartitionMap.build(g, is_red)
    next_id = 1000
    for _ in range(10):
        before_g = g.copy()
        before = _snapshot(g, pm)
        old_pid = dict(pm.pid)
        ins, edges, dele, next_id = _random_update(rng, g, next_id)
        delta = update_partition(g, ins, edges, dele, pm, is_red)
        # incremental map equals the full recomputation
        assert pm.pid == {v: compute_pid(g, is_red, v) for v in g.sizes}
        assert PartitionMap.build(g, is_red).members == pm.members
        # changed pids are all recorded, and lie within two hops of the update
        recorded = {v for v, _, _ in delta.entries}
        ball = _ball(before_g, g, set(ins) | set(dele), 2)
        for v in set(old_pid) | set(pm.pid):
            if old_pid.get(v) != pm.pid.get(v):
                assert v in recorded
                assert v in ball
        # superset property for dirty partitions
        dirty = dirty_partitions(delta, g, is_red)
        after = _snapshot(g, pm)
        for p, state in after.items():
            if before.get(p) != state:
                assert p in dirty


def test_delete_one_from_random_40():
    rng = random.Random(9)
    is_red = coloring(3)
    g = random_graph(rng, 40, 0.2)
    pm = PartitionMap.build(g, is_red)
    update_partition(g, {}, [], [17], pm, is_red)
    assert pm.pid == {v: compute_pid(g, is_red, v) for v in g.sizes}
    assert 17 not in pm.pid


def test_long_random_update_sequence_against_brute_force():
    rng = random.Random(2024)
    is_red = coloring(11)
    g = random_graph(rng, 60, 0.08)
    pm = PartitionMap.build(g, is_red)
    next_id = 10_000
    for _ in range(200):
        ins, edges, dele, next_id = _random_update(rng, g, next_id)
        if len(g) > 100:
            ins, edges = {}, []
        update_partition(g, ins, edges, dele, pm, is_red)
        assert pm.pid == {v: compute_pid(g, is_red, v) for v in g.sizes}
