"""Fully dynamic approximate average-linkage hierarchical agglomerative clustering."""

from .dendrogram import Dendrogram
from .engine import DynHAC, RoundReport, UpdateBatch, UpdateReport
from .errors import DynHACError
from .evaluation import best_cut_nmi, default_thresholds, nmi
from .graph import ClusteredGraph
from .oracle import Verdict, certify, seq_hac
from .records import MergeRecord

__all__ = [
    "ClusteredGraph",
    "Dendrogram",
    "DynHAC",
    "DynHACError",
    "MergeRecord",
    "RoundReport",
    "UpdateBatch",
    "UpdateReport",
    "Verdict",
    "best_cut_nmi",
    "certify",
    "default_thresholds",
    "nmi",
    "seq_hac",
]

__version__ = "0.1.0"
