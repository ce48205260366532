from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

VertexId = int


@dataclass(frozen=True, slots=True)
class MergeRecord:
    """One contraction: ``u`` and ``v`` became ``parent`` at ``similarity``.

    ``partition`` names the partition whose restricted HAC produced the
    merge; ``None`` means the merge was made with a whole-graph view.
    """

    u: VertexId
    v: VertexId
    parent: VertexId
    similarity: float
    round: int = 1
    seq: int = 0
    partition: Optional[VertexId] = None
