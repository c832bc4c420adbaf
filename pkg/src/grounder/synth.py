"""Synthetic demo corpus and dialogues.

Generates a deterministic desk-scale dataset mirroring the structure of the
real task: 200 tables across 20 disjoint topics, paraphrase training
queries, and synonym-substituted test queries. Every entity has a
canonical word (appears in table text) and a synonym (appears only in
queries), so a lexical retriever cannot match the test queries while a
trained dense retriever can.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Cell, CellRef, DialogueRecord, TableDocument, Turn, save_corpus, save_dialogues

_SYLLABLES = [
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
    "fa", "fe", "fi", "fo", "fu", "ga", "ge", "gi", "go", "gu",
    "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu",
    "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu",
]


def pseudo_word(i: int, prefix: str = "") -> str:
    """Deterministic distinct pseudo-word for index i."""
    n = len(_SYLLABLES)
    parts = []
    x = i
    for _ in range(3):
        parts.append(_SYLLABLES[x % n])
        x //= n
    return prefix + "".join(reversed(parts))


@dataclass(frozen=True)
class DemoSpec:
    n_topics: int = 20
    tables_per_topic: int = 10
    n_rows: int = 3
    n_cols: int = 3
    n_dialogues: int = 60
    cell_turns_per_dialogue: int = 2


@dataclass
class DemoData:
    tables: list[TableDocument]
    train_pairs: list[tuple[str, str]]
    test_cases: list[tuple[str, str]]
    dialogues: list[DialogueRecord]


def generate_demo(spec: DemoSpec = DemoSpec()) -> DemoData:
    n_tables = spec.n_topics * spec.tables_per_topic
    word_counter = 0

    def next_word(prefix: str) -> str:
        nonlocal word_counter
        w = pseudo_word(word_counter, prefix)
        word_counter += 1
        return w

    topics = [(next_word("t"), next_word("s")) for _ in range(spec.n_topics)]
    headers = ("Name", "Venue", "Season")[: spec.n_cols]

    tables: list[TableDocument] = []
    train_pairs: list[tuple[str, str]] = []
    test_cases: list[tuple[str, str]] = []
    cell_words: list[list[list[tuple[str, str]]]] = []  # [table][row][col] -> (canon, syn)

    for i in range(n_tables):
        topic, topic_syn = topics[i // spec.tables_per_topic]
        canon = next_word("c")
        syn = next_word("y")
        grid_words = [
            [(next_word("v"), next_word("w")) for _ in range(spec.n_cols)]
            for _ in range(spec.n_rows)
        ]
        cell_words.append(grid_words)
        rows = tuple(
            tuple(Cell(value=word) for word, _ in row) for row in grid_words
        )
        tables.append(
            TableDocument(
                table_id=f"tbl{i:03d}",
                page_title=f"{canon} {topic} records",
                page_intro=f"Statistics describing {canon} during the {topic} league season",
                section_title="Results",
                section_intro=f"Yearly results recorded for {canon}",
                headers=headers,
                rows=rows,
            )
        )
        # paraphrase training queries: mixes of canonical and synonym mentions
        train_pairs.extend(
            [
                (f"tell me about the {canon} {topic} records", tables[-1].table_id),
                (f"show me {syn} results", tables[-1].table_id),
                (f"what do you know about {syn}", tables[-1].table_id),
                (f"{syn} {topic_syn} overview", tables[-1].table_id),
                (f"give me the {canon} table", tables[-1].table_id),
            ]
        )
        # test query substitutes synonyms for every content word
        test_cases.append((f"show details on {syn} {topic_syn}", tables[-1].table_id))

    dialogues: list[DialogueRecord] = []
    for di in range(spec.n_dialogues):
        t_idx = di % n_tables
        table = tables[t_idx]
        topic, _ = topics[t_idx // spec.tables_per_topic]
        canon_title = table.page_title
        turns = [
            Turn(
                query=f"tell me about the {canon_title}",
                response=f"Here is the {topic} table.",
            )
        ]
        for ci in range(spec.cell_turns_per_dialogue):
            r = (di + ci) % spec.n_rows
            c = (di + 2 * ci + 1) % spec.n_cols
            value, value_syn = cell_words[t_idx][r][c]
            turns.append(
                Turn(
                    query=f"which entry is {value_syn}?",
                    response=f"The {table.headers[c]} is {value}.",
                    gold_cells=(CellRef(table.table_id, r, c),),
                )
            )
        dialogues.append(
            DialogueRecord(
                dialogue_id=f"dlg{di:03d}",
                gold_table_id=table.table_id,
                turns=tuple(turns),
            )
        )
    return DemoData(tables=tables, train_pairs=train_pairs, test_cases=test_cases, dialogues=dialogues)


def write_demo(out_dir: str | Path, spec: DemoSpec = DemoSpec()) -> dict[str, Path]:
    """Write the demo dataset and training configs under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_demo(spec)
    paths = {
        "corpus": out / "corpus.jsonl",
        "train_pairs": out / "train_pairs.jsonl",
        "test_cases": out / "test_cases.jsonl",
        "dialogues": out / "dialogues.jsonl",
        "retriever_config": out / "retriever_config.json",
        "ranker_config": out / "ranker_config.json",
    }
    save_corpus(data.tables, paths["corpus"])
    save_dialogues(data.dialogues, paths["dialogues"])
    with open(paths["train_pairs"], "w", encoding="utf-8") as fh:
        for query, table_id in data.train_pairs:
            fh.write(json.dumps({"query": query, "table_id": table_id}) + "\n")
    with open(paths["test_cases"], "w", encoding="utf-8") as fh:
        for query, table_id in data.test_cases:
            fh.write(json.dumps({"query": query, "table_id": table_id}) + "\n")
    retriever_config = {
        "epochs": 20, "batch_size": 32, "lr_peak": 1e-2, "warmup_steps": 5,
        "margin": 1.0, "seed": 0, "d": 64, "V": 8192, "ngram_max": 2,
    }
    ranker_config = dict(retriever_config, epochs=20)
    paths["retriever_config"].write_text(json.dumps(retriever_config, indent=2))
    paths["ranker_config"].write_text(json.dumps(ranker_config, indent=2))
    return paths


def load_pairs(path: str | Path) -> list[tuple[str, str]]:
    """JSONL of {"query", "table_id"} pairs (training pairs or eval cases)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                pairs.append((obj["query"], obj["table_id"]))
    return pairs
