import json

import pytest
from hypothesis import given, strategies as st

from grounder.corpus import (
    Cell,
    CellRef,
    CorpusError,
    DialogueRecord,
    TableDocument,
    Turn,
    linearize_cell,
    linearize_table,
    load_corpus,
    load_dialogues,
    save_corpus,
)


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj) + "\n")


def table_obj(table_id="t1", headers=("H1", "H2"), rows=None):
    if rows is None:
        rows = [[{"value": "a", "linked_text": ""}, {"value": "b", "linked_text": ""}]] * 2
    return {
        "table_id": table_id,
        "page_title": "Title",
        "page_intro": "",
        "section_title": "",
        "section_intro": "",
        "headers": list(headers),
        "rows": rows,
    }


class TestLoadCorpus:
    def test_single_table(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [table_obj()])
        tables = load_corpus(path)
        assert len(tables) == 1
        assert len(tables[0].headers) == 2
        assert len(tables[0].rows) == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("")
        assert load_corpus(path) == []

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [table_obj("t1"), table_obj("t1")])
        with pytest.raises(CorpusError, match="duplicate table_id"):
            load_corpus(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(table_obj()) + "\n{broken\n")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_ragged_grid_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        bad = table_obj(rows=[[{"value": "a", "linked_text": ""}]])
        write_jsonl(path, [bad])
        with pytest.raises(CorpusError, match="row 0"):
            load_corpus(path)

    def test_order_preserved(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [table_obj("b"), table_obj("a")])
        assert [t.table_id for t in load_corpus(path)] == ["b", "a"]

    def test_round_trip(self, tmp_path, wnba_table, faroe_table):
        path = tmp_path / "c.jsonl"
        save_corpus([wnba_table, faroe_table], path)
        assert load_corpus(path) == [wnba_table, faroe_table]


class TestLinearizeTable:
    def test_full_fields(self, wnba_table):
        assert linearize_table(wnba_table) == (
            "WNBA Finals | The WNBA Finals is the championship series. | Results | By year."
        )

    def test_title_only(self, faroe_table):
        assert linearize_table(faroe_table) == "2007 Faroe Islands Premier League"

    def test_skips_empty_fields(self):
        t = TableDocument(
            table_id="x", page_title="A", section_title="S", headers=("h",), rows=()
        )
        assert linearize_table(t) == "A | S"

    def test_excludes_cell_values(self, faroe_table):
        assert "EB/Streymur" not in linearize_table(faroe_table)

    def test_pure(self, wnba_table):
        assert linearize_table(wnba_table) == linearize_table(wnba_table)


class TestLinearizeCell:
    def test_plain_cell(self, faroe_table):
        ref = CellRef("faroe", 0, 0)
        assert linearize_cell(faroe_table, ref) == "[CELL] Team is EB/Streymur"

    def test_linked_cell(self, faroe_table):
        ref = CellRef("faroe", 0, 1)
        assert (
            linearize_cell(faroe_table, ref)
            == "[CELL] Stadium is Við Margáir ; Stadium in Streymnes"
        )

    def test_out_of_bounds(self, faroe_table):
        with pytest.raises(CorpusError, match="out of bounds"):
            linearize_cell(faroe_table, CellRef("faroe", 5, 0))


@given(st.data())
def test_linearize_cell_contains_header_and_value(data):
    n_rows = data.draw(st.integers(1, 4))
    n_cols = data.draw(st.integers(1, 4))
    word = st.text(alphabet="abcxyz", min_size=1, max_size=6)
    headers = tuple(data.draw(word) + str(c) for c in range(n_cols))
    rows = tuple(
        tuple(Cell(value=data.draw(word)) for _ in range(n_cols)) for _ in range(n_rows)
    )
    t = TableDocument(table_id="t", page_title="p", headers=headers, rows=rows)
    r = data.draw(st.integers(0, n_rows - 1))
    c = data.draw(st.integers(0, n_cols - 1))
    text = linearize_cell(t, CellRef("t", r, c))
    assert headers[c] in text
    assert rows[r][c].value in text


class TestLoadDialogues:
    def test_basic(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(
            path,
            [
                {
                    "dialogue_id": "d1",
                    "gold_table_id": "t1",
                    "turns": [
                        {"query": f"q{i}", "response": f"r{i}", "gold_cells": []}
                        for i in range(4)
                    ],
                }
            ],
        )
        records = load_dialogues(path)
        assert len(records) == 1
        assert len(records[0].turns) == 4

    def test_zero_turns_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [{"dialogue_id": "d1", "gold_table_id": "t1", "turns": []}])
        with pytest.raises(CorpusError, match="at least one turn"):
            load_dialogues(path)

    def test_two_dialogues_in_order(self, tmp_path):
        path = tmp_path / "d.jsonl"
        turns = [{"query": "q", "response": "r", "gold_cells": []}]
        write_jsonl(
            path,
            [
                {"dialogue_id": "d2", "gold_table_id": "t1", "turns": turns},
                {"dialogue_id": "d1", "gold_table_id": "t1", "turns": turns},
            ],
        )
        assert [d.dialogue_id for d in load_dialogues(path)] == ["d2", "d1"]

    def test_gold_cells_parsed(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(
            path,
            [
                {
                    "dialogue_id": "d1",
                    "gold_table_id": "t1",
                    "turns": [
                        {
                            "query": "q",
                            "response": "r",
                            "gold_cells": [{"table_id": "t1", "row": 1, "col": 0}],
                        }
                    ],
                }
            ],
        )
        (record,) = load_dialogues(path)
        assert record.turns[0].gold_cells == (CellRef("t1", 1, 0),)


def test_headers_must_be_non_empty():
    with pytest.raises(CorpusError, match="headers"):
        TableDocument(table_id="t", page_title="p", headers=(), rows=())
