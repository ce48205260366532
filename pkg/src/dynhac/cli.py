"""Command-line driver: generate data, replay update streams, evaluate dendrograms."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from typing import List, Optional, Sequence

from . import io
from .engine import DynHAC, UpdateBatch
from .errors import DynHACError
from .evaluation import default_thresholds, sweep
from .graph import ClusteredGraph
from .ingest import SIMILARITIES, deletion_stream, insertion_stream, synth_blobs
from .oracle import certify, seq_hac

log = logging.getLogger("dynhac")

METRIC_FIELDS = [
    "update_idx",
    "op",
    "micros",
    "rounds_touched",
    "dirty_vertices",
    "dirty_edges",
    "merges_new",
    "merges_reused",
]
STATIC_FIELDS = ["update_idx", "op", "micros", "merges"]


def _nonneg_float(s: str) -> float:
    x = float(s)
    if not x >= 0 or x == float("inf"):
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {s}")
    return x


def _pos_float(s: str) -> float:
    x = float(s)
    if not x > 0 or x == float("inf"):
        raise argparse.ArgumentTypeError(f"expected a finite value > 0, got {s}")
    return x


def _pos_int(s: str) -> int:
    x = int(s)
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return x


def _u64(s: str) -> int:
    x = int(s, 0)
    if not 0 <= x < 1 << 64:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {s}")
    return x


def _thresholds(s: str) -> List[float]:
    try:
        vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("expected a comma-separated list of thresholds >= 0")
    return vals


def _op(batch: UpdateBatch) -> str:
    if batch.insert and batch.delete:
        return "mixed"
    if batch.insert:
        return "insert"
    if batch.delete:
        return "delete"
    return "empty"


def _add_hac_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=_nonneg_float, default=0.1, help="approximation slack (default 0.1)")
    p.add_argument("--threshold", type=_pos_float, default=0.01, help="linkage similarity floor t (default 0.01)")
    p.add_argument("--certify", choices=("off", "final", "each"), default="off")
    p.add_argument("--metrics-out", help="per-update CSV")
    p.add_argument("--trace-out", help="merge trace file")
    p.add_argument("--dendrogram-out", help="dendrogram export file")
    p.add_argument("--labels", help="ground truth (item_id<TAB>label) for a final NMI report")
    p.add_argument("--thresholds", type=_thresholds, help="comma-separated cut thresholds")


def _add_source_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--stream", help="update stream (JSON Lines)")
    src.add_argument("--points", help="points CSV; replayed as an insertion stream")
    p.add_argument("--k", type=_pos_int, default=50, help="neighbours per point (default 50)")
    p.add_argument("--sim", choices=SIMILARITIES, default="invdist")
    p.add_argument("--prefix", type=float, default=0.99, help="bulk-inserted fraction for --points")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed for --points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynhac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blobs", help="write a synthetic Gaussian-blob point set")
    p.add_argument("--out", required=True, help="points CSV")
    p.add_argument("--labels-out", help="also write a labels file")
    p.add_argument("--clusters", type=_pos_int, default=10)
    p.add_argument("--per-cluster", type=_pos_int, default=200)
    p.add_argument("--dim", type=_pos_int, default=2)
    p.add_argument("--spread", type=_pos_float, default=0.5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("make-stream", help="turn a points CSV into an update stream")
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True, help="stream JSON Lines")
    p.add_argument("--mode", choices=("insert", "delete"), default="insert")
    p.add_argument("--k", type=_pos_int, default=50)
    p.add_argument("--sim", choices=SIMILARITIES, default="invdist")
    p.add_argument("--prefix", type=float, default=0.99, help="bulk-inserted fraction (insert mode)")
    p.add_argument("--batches", type=_pos_int, default=100, help="build batches (delete mode)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run-dynamic", help="replay a stream through the dynamic engine")
    _add_source_args(p)
    _add_hac_args(p)
    p.add_argument("--color-seed", type=_u64, default=0)
    p.add_argument("--snapshot-in", help="resume from this snapshot")
    p.add_argument("--snapshot-out", help="write a snapshot after the stream")
    p.add_argument("--threads", type=_pos_int, default=1)

    p = sub.add_parser("run-static", help="from-scratch HAC on the stream's final graph")
    _add_source_args(p)
    _add_hac_args(p)
    p.add_argument("--every", type=_pos_int, help="also recompute after every N-th update")

    p = sub.add_parser("eval", help="best flat cut of a dendrogram against ground truth")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--thresholds", type=_thresholds)
    return parser


def _load_batches(args) -> List[UpdateBatch]:
    if args.stream:
        return list(io.read_stream(args.stream))
    if args.points:
        if not 0.0 <= args.prefix <= 1.0:
            raise DynHACError("--prefix must lie in [0, 1]")
        ps = io.read_points(args.points)
        return insertion_stream(ps, args.k, args.prefix, args.sim, args.seed)
    return []


def _report_nmi(d, args) -> None:
    if not args.labels:
        return
    truth = io.read_labels(args.labels)
    flat_items = set(d.leaves())
    truth = {v: lab for v, lab in truth.items() if v in flat_items}
    if not truth:
        log.warning("no labelled item is a leaf of the dendrogram")
        return
    rows = sweep(d, truth, sorted(args.thresholds or default_thresholds()))
    theta, score, _ = max(rows, key=lambda r: (r[1], -r[0]))
    print(f"best_theta={theta:.6g} nmi={score:.6f}")


def _write_outputs(args, merges, d) -> None:
    if args.trace_out:
        with open(args.trace_out, "w") as f:
            io.write_trace(f, merges)
    if args.dendrogram_out:
        with open(args.dendrogram_out, "w") as f:
            io.write_dendrogram(f, d)


def cmd_blobs(args) -> int:
    ps = synth_blobs(args.clusters, args.per_cluster, args.dim, args.spread, args.seed)
    io.write_points(args.out, ps)
    if args.labels_out:
        io.write_labels(args.labels_out, ps.label_map())
    return 0


def cmd_make_stream(args) -> int:
    ps = io.read_points(args.points)
    if args.mode == "insert":
        if not 0.0 <= args.prefix <= 1.0:
            raise DynHACError("--prefix must lie in [0, 1]")
        io.write_stream(args.out, insertion_stream(ps, args.k, args.prefix, args.sim, args.seed))
    else:
        build, dels = deletion_stream(ps, args.k, args.batches, args.sim, args.seed)
        io.write_stream(args.out, [build] + dels)
    return 0


def cmd_run_dynamic(args) -> int:
    if args.threads > 1:
        log.warning("--threads %d requested; partitions are processed on one thread", args.threads)
    if args.snapshot_in:
        engine = io.load_snapshot(args.snapshot_in)
        if (engine.epsilon, engine.threshold, engine.seed) != (args.epsilon, args.threshold, args.color_seed):
            log.warning(
                "snapshot parameters (epsilon=%g, t=%g, seed=%d) override the command line",
                engine.epsilon, engine.threshold, engine.seed,
            )
    else:
        engine = DynHAC(args.epsilon, args.threshold, args.color_seed)
    batches = _load_batches(args)
    fields = METRIC_FIELDS + (["certified"] if args.certify == "each" else [])
    out = open(args.metrics_out, "w", newline="") if args.metrics_out else None
    failed = False
    try:
        writer = csv.writer(out) if out else None
        if writer:
            writer.writerow(fields)
        for idx, batch in enumerate(batches):
            try:
                t0 = time.perf_counter()
                rep = engine.apply_update(batch)
                micros = int((time.perf_counter() - t0) * 1e6)
            except DynHACError as exc:
                raise DynHACError(f"update {idx}: {exc}") from exc
            row = [
                idx,
                _op(batch),
                micros,
                rep.rounds_touched,
                rep.total("dirty_vertices"),
                rep.total("dirty_edges"),
                rep.total("merges_new"),
                rep.total("merges_reused"),
            ]
            if args.certify == "each":
                verdict = engine.certify()
                row.append("accepted" if verdict else "rejected")
                if not verdict:
                    failed = True
                    log.error("update %d rejected at seq %s: %s", idx, verdict.seq, verdict.reason)
            if writer:
                writer.writerow(row)
            log.debug("update %d: %s", idx, row)
    finally:
        if out:
            out.close()
    if args.certify == "final":
        verdict = engine.certify()
        print(f"certificate: {'accepted' if verdict else 'rejected'}" + ("" if verdict else f" ({verdict.reason})"))
        failed = failed or not verdict
    elif args.certify == "each":
        print(f"certificate: {'rejected' if failed else 'accepted'} after every update")
    _write_outputs(args, engine.merge_trace(), engine.dendrogram)
    if args.snapshot_out:
        io.save_snapshot(args.snapshot_out, engine)
    _report_nmi(engine.dendrogram, args)
    return 1 if failed else 0


def _apply_to_graph(g: ClusteredGraph, batch: UpdateBatch) -> None:
    for v in batch.delete:
        g.remove_vertex(v)
    for v in batch.insert:
        g.add_vertex(v)
    for u, v, w in batch.edges:
        g.add_edge(u, v, w)


def cmd_run_static(args) -> int:
    batches = _load_batches(args)
    g = ClusteredGraph()
    out = open(args.metrics_out, "w", newline="") if args.metrics_out else None
    writer = csv.writer(out) if out else None
    if writer:
        writer.writerow(STATIC_FIELDS)
    d = merges = None
    try:
        for idx, batch in enumerate(batches):
            try:
                _apply_to_graph(g, batch)
            except DynHACError as exc:
                raise DynHACError(f"update {idx}: {exc}") from exc
            if args.every and (idx + 1) % args.every == 0:
                t0 = time.perf_counter()
                d, merges = seq_hac(g, args.epsilon, args.threshold)
                micros = int((time.perf_counter() - t0) * 1e6)
                if writer:
                    writer.writerow([idx, _op(batch), micros, len(merges)])
        if merges is None or not args.every or len(batches) % args.every:
            t0 = time.perf_counter()
            d, merges = seq_hac(g, args.epsilon, args.threshold)
            micros = int((time.perf_counter() - t0) * 1e6)
            if writer:
                writer.writerow([len(batches) - 1, "final", micros, len(merges)])
    finally:
        if out:
            out.close()
    failed = False
    if args.certify != "off":
        verdict = certify(g, merges, args.epsilon, args.threshold, None, True)
        print(f"certificate: {'accepted' if verdict else 'rejected'}" + ("" if verdict else f" ({verdict.reason})"))
        failed = not verdict
    _write_outputs(args, merges, d)
    _report_nmi(d, args)
    return 1 if failed else 0


def cmd_eval(args) -> int:
    with open(args.dendrogram) as f:
        d = io.read_dendrogram(f)
    truth = io.read_labels(args.labels)
    leaves = set(d.leaves())
    missing = [v for v in truth if v not in leaves]
    if missing:
        log.warning("%d labelled items are not dendrogram leaves; ignored", len(missing))
    truth = {v: lab for v, lab in truth.items() if v in leaves}
    if not truth:
        raise DynHACError("no labelled item appears in the dendrogram")
    rows = sweep(d, truth, sorted(args.thresholds or default_thresholds()))
    print("# NMI: arithmetic-mean normalisation; two single-cluster labelings score 1, one vs many scores 0")
    print("theta\tnmi\tclusters")
    for theta, score, k in rows:
        print(f"{theta:.6g}\t{score:.6f}\t{k}")
    theta, score, _ = max(rows, key=lambda r: (r[1], -r[0]))
    print(f"best_theta={theta:.6g} nmi={score:.6f}")
    return 0


COMMANDS = {
    "blobs": cmd_blobs,
    "make-stream": cmd_make_stream,
    "run-dynamic": cmd_run_dynamic,
    "run-static": cmd_run_static,
    "eval": cmd_eval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("DYNHAC_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DynHACError, OSError) as exc:
        print(f"dynhac: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
