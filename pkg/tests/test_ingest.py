import numpy as np
import pytest

from dynhac.engine import DynHAC
from dynhac.errors import DynHACError
from dynhac.evaluation import best_cut_nmi, nmi
from dynhac.ingest import PointSet, deletion_stream, insertion_stream, knn_edges, synth_blobs
from dynhac.oracle import seq_hac
from dynhac.graph import ClusteredGraph


def _line():
    return PointSet([0, 1, 2], [[0.0], [1.0], [2.5]])


def test_collinear_k1():
    edges = knn_edges(_line(), [0, 2], [0, 1, 2], 1)
    assert [(u, v) for u, v, _ in edges] == [(0, 1), (1, 2)]
    assert edges[0][2] == pytest.approx(0.5)


def test_k_at_least_candidates_gives_all_links():
    ps = synth_blobs(2, 5, seed=1)
    q, c = [0, 1, 2], [5, 6, 7, 8]
    edges = knn_edges(ps, q, c, 10)
    assert {(u, v) for u, v, _ in edges} == {(a, b) for a in q for b in c}


def test_duplicates_tie_to_smaller_id():
    ps = PointSet([5, 3, 9, 1], [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    edges = knn_edges(ps, [5], [3, 9, 1], 2)
    assert [(u, v) for u, v, _ in edges] == [(1, 5), (3, 5)]
    assert edges[0][2] == edges[1][2]


def test_empty_candidates_and_bad_args():
    assert knn_edges(_line(), [0], [], 3) == []
    assert knn_edges(_line(), [0], [0], 3) == []
    with pytest.raises(ValueError):
        knn_edges(_line(), [0], [1], 0)
    with pytest.raises(ValueError):
        knn_edges(_line(), [0], [1], 1, sim="manhattan")


def test_cosine_weights_in_unit_interval():
    ps = PointSet([0, 1, 2, 3], [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    edges = knn_edges(ps, [0, 1, 2, 3], [0, 1, 2, 3], 3, sim="cosine")
    ws = {(u, v): w for u, v, w in edges}
    assert all(0 < w <= 1 for w in ws.values())
    assert ws[(0, 1)] == pytest.approx(1e-12)
    assert ws[(0, 2)] == pytest.approx(0.5)


def test_pointset_validation():
    with pytest.raises(DynHACError):
        PointSet([0, 0], [[0.0], [1.0]])
    with pytest.raises(DynHACError):
        PointSet([0, 1], [[0.0]])
    with pytest.raises(DynHACError):
        PointSet([0], [[0.0]], ["a", "b"])


def test_blobs_shape_and_seed():
    ps = synth_blobs(3, 4, d=5, seed=0)
    assert len(ps) == 12 and ps.dim == 5 and len(set(ps.labels)) == 3
    assert not np.allclose(ps.X, synth_blobs(3, 4, d=5, seed=1).X)
    with pytest.raises(ValueError):
        synth_blobs(0, 4)


def test_single_blob_entropy_zero():
    ps = synth_blobs(1, 20, seed=0)
    truth = ps.label_map()
    assert nmi(truth, {v: v for v in truth}) == 0.0


def test_static_blob_quality():
    ps = synth_blobs(10, 200, seed=0)
    g = ClusteredGraph.from_edges([int(v) for v in ps.ids], knn_edges(ps, ps.ids, ps.ids, 10))
    d, _ = seq_hac(g, 0.0, 1e-4)
    _, score = best_cut_nmi(d, ps.label_map())
    assert score >= 0.9


def _replay_valid(stream):
    live = set()
    for b in stream:
        for v in b.insert:
            assert v not in live
        ins = set(b.insert)
        for u, v, w in b.edges:
            assert w > 0
            assert u in ins or v in ins
            assert u not in b.delete and v not in b.delete
            assert u in live | ins and v in live | ins
        for v in b.delete:
            assert v in live
        live |= ins
        live -= set(b.delete)
    return live


def test_insertion_stream_shapes():
    ps = synth_blobs(2, 10, seed=0)
    s0 = insertion_stream(ps, k=3, prefix_fraction=0.0)
    assert len(s0) == 20 and all(len(b.insert) == 1 for b in s0)
    assert len(insertion_stream(ps, k=3, prefix_fraction=1.0)) == 1
    s = insertion_stream(ps, k=3, prefix_fraction=0.5, seed=4)
    assert len(s) == 11
    assert _replay_valid(s) == set(range(20))
    with pytest.raises(ValueError):
        insertion_stream(ps, prefix_fraction=1.5)


def test_insertion_edges_only_to_earlier_points():
    ps = synth_blobs(2, 15, seed=2)
    s = insertion_stream(ps, k=4, prefix_fraction=0.0, seed=1)
    seen = set()
    for b in s:
        (x,) = b.insert
        assert len(b.edges) == min(4, len(seen))
        for u, v, _ in b.edges:
            assert (v if u == x else u) in seen
        seen.add(x)


def test_deletion_stream_properties():
    ps = synth_blobs(3, 10, seed=0)
    build, dels = deletion_stream(ps, k=3, num_batches=1)
    ref = knn_edges(ps, ps.ids, ps.ids, 3)
    assert sorted((u, v) for u, v, _ in build.edges) == [(u, v) for u, v, _ in ref]
    build, dels = deletion_stream(ps, k=3, num_batches=5, seed=3)
    assert dels[0].delete == [build.insert[-1]]
    assert _replay_valid([build] + dels) == set()
    e = DynHAC(0.1, 0.01)
    for b in [build] + dels:
        e.apply_update(b)
    assert e.num_rounds == 0 and len(e.dendrogram) == 0
    with pytest.raises(ValueError):
        deletion_stream(ps, num_batches=0)
