"""Coarse state tracking: dialogue-history anchor and cell ranking.

The anchor concatenates prior (query, response) turns with the current
query; the active table's cells are ranked by ascending L2 distance
between the anchor embedding and each cell embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CellRef, TableDocument, linearize_cell
from .encoder import DualEncoder, encode
from .ranking import RankedList


@dataclass(frozen=True)
class DialogueHistory:
    turns: tuple[tuple[str, str], ...]
    current_query: str

    def __post_init__(self) -> None:
        if not self.current_query:
            raise ValueError("current_query must be non-empty")


def history_text(h: DialogueHistory, max_turns: int = 0) -> str:
    """Flatten history into "Q: .. A: .." blocks plus the current query.

    max_turns=0 keeps the complete history; otherwise only the most recent
    max_turns prior turns are retained.
    """
    if max_turns < 0:
        raise ValueError(f"max_turns must be >= 0, got {max_turns}")
    turns = h.turns if max_turns == 0 else h.turns[-max_turns:]
    parts = [f"Q: {q} A: {r}" for q, r in turns]
    parts.append(f"Q: {h.current_query}")
    return " ".join(parts)


def rank_cells(
    de: DualEncoder,
    table: TableDocument,
    h: DialogueHistory,
    k: int,
    max_turns: int = 0,
) -> RankedList[CellRef]:
    """Rank the table's cells by relevance to the dialogue-history anchor.

    Score is the negated anchor-to-cell L2 distance, so higher is closer;
    ties resolve to row-major cell order.
    """
    refs = table.cell_refs()
    if not refs:
        raise ValueError(f"table {table.table_id!r} has no cells")
    anchor = encode(de.query_encoder, history_text(h, max_turns))
    scored = []
    for ref in refs:
        cell_emb = encode(de.knowledge_encoder, linearize_cell(table, ref))
        scored.append((ref, -float(np.linalg.norm(anchor - cell_emb))))
    return RankedList.from_scored(scored, k)
