"""File formats: update streams, points, labels, merge traces, dendrograms and snapshots."""

from __future__ import annotations

import csv
import json
import os
from typing import Dict, Iterable, Iterator, List, Sequence, TextIO

import numpy as np

from .dendrogram import Dendrogram
from .engine import DynHAC, UpdateBatch
from .errors import FormatError, SnapshotError
from .ingest import PointSet
from .records import MergeRecord


def _fmt(x: float) -> str:
    return "%.17g" % x


# -- update streams ---------------------------------------------------------


def batch_to_json(batch: UpdateBatch) -> str:
    by_vertex: Dict[int, List[list]] = {v: [] for v in batch.insert}
    ins = set(batch.insert)
    for u, v, w in batch.edges:
        if u in ins:
            by_vertex[u].append([v, w])
        else:
            by_vertex[v].append([u, w])
    obj = {
        "insert": [{"id": v, "edges": by_vertex[v]} for v in batch.insert],
        "delete": list(batch.delete),
    }
    return json.dumps(obj, separators=(",", ":"))


def batch_from_json(line: str, lineno: int = 0) -> UpdateBatch:
    try:
        obj = json.loads(line)
        batch = UpdateBatch()
        for item in obj.get("insert", []):
            v = int(item["id"])
            batch.insert.append(v)
            for x, w in item.get("edges", []):
                batch.edges.append((v, int(x), float(w)))
        batch.delete = [int(v) for v in obj.get("delete", [])]
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"stream line {lineno}: {exc}") from exc
    return batch


def write_stream(path: str, batches: Iterable[UpdateBatch]) -> None:
    with open(path, "w") as f:
        for b in batches:
            f.write(batch_to_json(b))
            f.write("\n")


def read_stream(path: str) -> Iterator[UpdateBatch]:
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                yield batch_from_json(line, lineno)


# -- points and labels ------------------------------------------------------


def write_points(path: str, ps: PointSet) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "label"] + [f"x{j + 1}" for j in range(ps.dim)])
        labels = ps.labels or [None] * len(ps)
        for v, lab, row in zip(ps.ids, labels, ps.X):
            w.writerow([int(v), "" if lab is None else lab] + [_fmt(float(x)) for x in row])


def read_points(path: str) -> PointSet:
    ids, labels, rows = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "label"]:
            raise FormatError(f"{path}: expected header starting with id,label")
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            try:
                ids.append(int(rec[0]))
                labels.append(rec[1] or None)
                rows.append([float(x) for x in rec[2:]])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if rows and len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows have differing dimensions")
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(rows[0]) if rows else 0)
    return PointSet(np.array(ids, dtype=np.int64), X, labels)


def write_labels(path: str, labels: Dict[int, object]) -> None:
    with open(path, "w") as f:
        for v in sorted(labels):
            f.write(f"{v}\t{labels[v]}\n")


def read_labels(path: str) -> Dict[int, str]:
    out: Dict[int, str] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'item_id<TAB>label'")
            try:
                out[int(parts[0])] = parts[1]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


# -- merge traces -----------------------------------------------------------


def write_trace(f: TextIO, merges: Sequence[MergeRecord]) -> None:
    """``seq round u v parent similarity partition``; partition is ``-`` when unknown."""
    for m in merges:
        part = "-" if m.partition is None else str(m.partition)
        f.write(f"{m.seq} {m.round} {m.u} {m.v} {m.parent} {_fmt(m.similarity)} {part}\n")


def read_trace(f: TextIO) -> List[MergeRecord]:
    out = []
    for lineno, line in enumerate(f, 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (6, 7):
            raise FormatError(f"trace line {lineno}: expected 6 or 7 fields")
        try:
            seq, rnd, u, v, z = (int(x) for x in parts[:5])
            sim = float(parts[5])
            part = None if len(parts) == 6 or parts[6] == "-" else int(parts[6])
        except ValueError as exc:
            raise FormatError(f"trace line {lineno}: {exc}") from exc
        out.append(MergeRecord(u, v, z, sim, rnd, seq, part))
    return out


# -- dendrograms ------------------------------------------------------------


def write_dendrogram(f: TextIO, d: Dendrogram) -> None:
    """Leaf manifest (``leaf <id>``) followed by ``parent child1 child2 similarity`` lines."""
    for v in sorted(d.leaves()):
        f.write(f"leaf {v}\n")
    for n in sorted(d.internal_nodes(), key=lambda n: n.id):
        f.write(f"{n.id} {n.children[0]} {n.children[1]} {_fmt(n.similarity)}\n")


def read_dendrogram(f: TextIO) -> Dendrogram:
    d = Dendrogram()
    leaves, internal = [], []
    for lineno, line in enumerate(f, 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "leaf" and len(parts) == 2:
                leaves.append(int(parts[1]))
            elif len(parts) == 4:
                internal.append((int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ValueError("expected 'leaf <id>' or 'parent child1 child2 similarity'")
        except ValueError as exc:
            raise FormatError(f"dendrogram line {lineno}: {exc}") from exc
    d.add_leaves(leaves)
    pending = {z: (a, b, s) for z, a, b, s in internal}
    while pending:
        ready = sorted(z for z, (a, b, _) in pending.items() if a in d.nodes and b in d.nodes)
        if not ready:
            raise FormatError("dendrogram references unknown children")
        for z in ready:
            a, b, s = pending.pop(z)
            d.merge(a, b, z, s)
    return d


# -- snapshots --------------------------------------------------------------


def dump_snapshot(engine: DynHAC) -> str:
    return json.dumps(engine.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def save_snapshot(path: str, engine: DynHAC) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(dump_snapshot(engine))
    os.replace(tmp, path)


def load_snapshot(path: str) -> DynHAC:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{path}: not valid JSON ({exc})") from exc
    return DynHAC.from_dict(data)
