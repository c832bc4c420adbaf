"""Table and dialogue data model, JSONL ingestion, and linearization.

Tables are the retrieval unit; cells (plus their header, and any hyperlinked
text) are the ranking unit. Linearization flattens both into deterministic
strings consumed by the encoders and the prompt builder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class CorpusError(Exception):
    """Raised on malformed corpus or dialogue input."""


@dataclass(frozen=True)
class Cell:
    value: str
    linked_text: str = ""


@dataclass(frozen=True)
class CellRef:
    """Address of a single cell within a table's grid (0-based)."""

    table_id: str
    row: int
    col: int


@dataclass(frozen=True)
class TableDocument:
    table_id: str
    page_title: str
    headers: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    page_intro: str = ""
    section_title: str = ""
    section_intro: str = ""

    def __post_init__(self) -> None:
        if not self.headers:
            raise CorpusError(f"table {self.table_id!r}: headers must be non-empty")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise CorpusError(
                    f"table {self.table_id!r}: row {i} has {len(row)} cells, "
                    f"expected {len(self.headers)}"
                )

    @property
    def n_cells(self) -> int:
        return len(self.rows) * len(self.headers)

    def cell(self, ref: CellRef) -> Cell:
        if not (0 <= ref.row < len(self.rows) and 0 <= ref.col < len(self.headers)):
            raise CorpusError(
                f"cell ({ref.row}, {ref.col}) out of bounds for table "
                f"{self.table_id!r} ({len(self.rows)}x{len(self.headers)})"
            )
        return self.rows[ref.row][ref.col]

    def cell_refs(self) -> list[CellRef]:
        """All cells of the table in row-major order."""
        return [
            CellRef(self.table_id, r, c)
            for r in range(len(self.rows))
            for c in range(len(self.headers))
        ]


@dataclass(frozen=True)
class Turn:
    query: str
    response: str
    gold_cells: tuple[CellRef, ...] = ()


@dataclass(frozen=True)
class DialogueRecord:
    dialogue_id: str
    gold_table_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise CorpusError(f"dialogue {self.dialogue_id!r}: needs at least one turn")


def linearize_table(t: TableDocument) -> str:
    """Flatten a table's title and associated text into one string.

    Cell values are deliberately excluded: the table encoder consumes the
    title plus surrounding article text only.
    """
    parts = [t.page_title, t.page_intro, t.section_title, t.section_intro]
    return " | ".join(p for p in parts if p)


def linearize_cell(t: TableDocument, ref: CellRef) -> str:
    """Flatten one cell into "[CELL] <header> is <value>[ ; <linked text>]"."""
    cell = t.cell(ref)
    text = f"[CELL] {t.headers[ref.col]} is {cell.value}"
    if cell.linked_text:
        text += f" ; {cell.linked_text}"
    return text


def _table_from_obj(obj: dict, line_no: int) -> TableDocument:
    try:
        rows = tuple(
            tuple(Cell(value=c["value"], linked_text=c.get("linked_text", "")) for c in row)
            for row in obj["rows"]
        )
        return TableDocument(
            table_id=obj["table_id"],
            page_title=obj["page_title"],
            page_intro=obj.get("page_intro", ""),
            section_title=obj.get("section_title", ""),
            section_intro=obj.get("section_intro", ""),
            headers=tuple(obj["headers"]),
            rows=rows,
        )
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"line {line_no}: bad table record: {exc}") from exc


def load_corpus(path: str | Path) -> list[TableDocument]:
    """Load a JSONL corpus, one table per line. Order preserved."""
    tables: list[TableDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from exc
            t = _table_from_obj(obj, line_no)
            if t.table_id in seen:
                raise CorpusError(f"line {line_no}: duplicate table_id {t.table_id!r}")
            seen.add(t.table_id)
            tables.append(t)
    return tables


def save_corpus(tables: Iterable[TableDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tables:
            obj = {
                "table_id": t.table_id,
                "page_title": t.page_title,
                "page_intro": t.page_intro,
                "section_title": t.section_title,
                "section_intro": t.section_intro,
                "headers": list(t.headers),
                "rows": [
                    [{"value": c.value, "linked_text": c.linked_text} for c in row]
                    for row in t.rows
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _dialogue_from_obj(obj: dict, line_no: int) -> DialogueRecord:
    try:
        turns = tuple(
            Turn(
                query=t["query"],
                response=t["response"],
                gold_cells=tuple(
                    CellRef(table_id=g["table_id"], row=g["row"], col=g["col"])
                    for g in t.get("gold_cells", [])
                ),
            )
            for t in obj["turns"]
        )
        return DialogueRecord(
            dialogue_id=obj["dialogue_id"],
            gold_table_id=obj["gold_table_id"],
            turns=turns,
        )
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"line {line_no}: bad dialogue record: {exc}") from exc
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from exc


def load_dialogues(path: str | Path) -> list[DialogueRecord]:
    """Load a JSONL dialogue file, one dialogue per line. Order preserved."""
    dialogues: list[DialogueRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from exc
            dialogues.append(_dialogue_from_obj(obj, line_no))
    return dialogues


def save_dialogues(dialogues: Iterable[DialogueRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogues:
            obj = {
                "dialogue_id": d.dialogue_id,
                "gold_table_id": d.gold_table_id,
                "turns": [
                    {
                        "query": t.query,
                        "response": t.response,
                        "gold_cells": [
                            {"table_id": g.table_id, "row": g.row, "col": g.col}
                            for g in t.gold_cells
                        ],
                    }
                    for t in d.turns
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def corpus_by_id(tables: Sequence[TableDocument]) -> dict[str, TableDocument]:
    return {t.table_id: t for t in tables}
