"""Automatic metrics (MRR@N, Top-k accuracy, ROUGE-1/2/L precision) and
batch evaluation runners emitting report tables.

ROUGE-n precision uses clipped n-gram counts; ROUGE-L precision is LCS
length over candidate token count. Both share the package tokenizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .corpus import CellRef, DialogueRecord, TableDocument, corpus_by_id
from .encoder import DualEncoder, encode
from .index import DenseIndex, search
from .ranking import RankedList
from .responder import Engine, Mode, TurnResult, answer_turn
from .sparse import Bm25Index, bm25_search
from .text_features import tokenize
from .tracker import DialogueHistory


class EvalError(Exception):
    pass


# -- core metrics -----------------------------------------------------------


def reciprocal_rank(ranked: RankedList, gold_id, cutoff: int = 10) -> float:
    """1/rank of gold within the first ``cutoff`` positions, else 0."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    rank = ranked.rank_of(gold_id)
    if rank is None or rank > cutoff:
        return 0.0
    return 1.0 / rank


def mrr(cases: Sequence, ranker: Callable[..., RankedList], cutoff: int = 10) -> float:
    """Mean reciprocal rank of ``ranker(query)`` against each case's gold id."""
    if not cases:
        raise EvalError("mrr over an empty case set")
    total = 0.0
    for query, gold_id in cases:
        total += reciprocal_rank(ranker(query), gold_id, cutoff)
    return total / len(cases)


def topk_accuracy(cases: Sequence, ranker: Callable[..., RankedList], k: int) -> float:
    """Fraction of cases whose gold id appears in the first k positions."""
    if not cases:
        raise EvalError("topk_accuracy over an empty case set")
    hits = 0
    for query, gold_id in cases:
        rank = ranker(query).rank_of(gold_id)
        if rank is not None and rank <= k:
            hits += 1
    return hits / len(cases)


def _ngram_counts(tokens: list[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def lcs_length(a: list[str], b: list[str]) -> int:
    """LCS length over token sequences (shared-vocabulary int mapping)."""
    vocab: dict[str, int] = {}
    ids_a = np.array([vocab.setdefault(t, len(vocab)) for t in a], dtype=np.int64)
    ids_b = np.array([vocab.setdefault(t, len(vocab)) for t in b], dtype=np.int64)
    return _kernels.lcs_length(ids_a, ids_b)


def rouge_precision(candidate: str, reference: str, variant: str) -> float:
    """ROUGE precision of candidate against reference; variant "1", "2", or "L"."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        return 0.0
    if variant == "L":
        return lcs_length(cand, ref) / len(cand)
    n = {"1": 1, "2": 2}.get(variant)
    if n is None:
        raise ValueError(f"unknown ROUGE variant {variant!r}")
    cand_grams = _ngram_counts(cand, n)
    if not cand_grams:
        return 0.0
    ref_grams = _ngram_counts(ref, n)
    matched = sum(min(c, ref_grams.get(g, 0)) for g, c in cand_grams.items())
    return matched / sum(cand_grams.values())


# -- reports ----------------------------------------------------------------


@dataclass
class MetricReport:
    metrics: dict[str, float]
    case_count: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"metrics": self.metrics, "case_count": self.case_count, "details": self.details},
            indent=2,
            sort_keys=True,
        )

    def to_table(self) -> str:
        """Aligned-column text table, one metric per row."""
        if not self.metrics:
            return "(no metrics)"
        width = max(len(k) for k in self.metrics)
        lines = [f"{k.ljust(width)}  {v:.4f}" for k, v in sorted(self.metrics.items())]
        lines.append(f"{'cases'.ljust(width)}  {self.case_count}")
        return "\n".join(lines)


# -- runners ----------------------------------------------------------------


def run_retrieval_eval(
    corpus: Sequence[TableDocument],
    cases: Sequence[tuple[str, str]],
    retriever: str,
    de: DualEncoder | None = None,
    dense: DenseIndex | None = None,
    bm25: Bm25Index | None = None,
) -> MetricReport:
    """First-turn table retrieval metrics (MRR@10, Top-1, Top-3)."""
    if not cases:
        raise EvalError("no retrieval cases")
    if retriever == "bm25":
        if bm25 is None:
            raise EvalError("bm25 retriever requested but no BM25 index supplied")
        ranker = lambda q: bm25_search(bm25, q, 10)
    elif retriever == "dense":
        if de is None or dense is None:
            raise EvalError("dense retriever requested but encoder/index missing")
        ranker = lambda q: search(dense, encode(de.query_encoder, q), 10)
    else:
        raise EvalError(f"unknown retriever {retriever!r}")
    report = MetricReport(
        metrics={
            "mrr@10": mrr(cases, ranker, 10),
            "top1": topk_accuracy(cases, ranker, 1),
            "top3": topk_accuracy(cases, ranker, 3),
        },
        case_count=len(cases),
        details={"retriever": retriever},
    )
    return report


def run_dialogue_eval(
    engine: Engine,
    dialogues: Sequence[DialogueRecord],
    mode: Mode,
    table_retrieval: str = "gold",
) -> MetricReport:
    """Follow-up evaluation: cell-ranking metrics plus ROUGE of generated answers.

    table_retrieval selects the active table per dialogue: "gold" pins the
    annotated table, "dense"/"bm25" run first-turn retrieval on the opening
    query. Ranking metrics cover turns with gold cells; ROUGE covers every
    turn after the first, averaged per turn (per-dialogue means are also
    recorded in details).
    """
    if not dialogues:
        raise EvalError("no dialogues")
    from .tracker import rank_cells

    rr_total = 0.0
    hits = {1: 0, 3: 0, 10: 0}
    ranked_turns = 0
    skipped_no_gold = 0
    rouge_rows: list[tuple[float, float, float]] = []
    per_dialogue_rouge: list[tuple[float, float, float]] = []

    for dlg in dialogues:
        if table_retrieval == "gold":
            table_id = dlg.gold_table_id
        else:
            ranked = engine.retrieve_table(
                dlg.turns[0].query, k=1, sparse=(table_retrieval == "bm25")
            )
            table_id = ranked.ids()[0]
        table = engine.corpus.get(table_id)
        if table is None:
            raise EvalError(f"dialogue {dlg.dialogue_id!r}: table {table_id!r} not in corpus")

        prior: list[tuple[str, str]] = []
        dlg_rouge: list[tuple[float, float, float]] = []
        for turn_no, turn in enumerate(dlg.turns):
            history = DialogueHistory(turns=tuple(prior), current_query=turn.query)
            if turn_no > 0:
                if turn.gold_cells:
                    ranked_cells = rank_cells(engine.encoder, table, history, k=10)
                    gold_refs = {(g.row, g.col) for g in turn.gold_cells}
                    best = None
                    for pos, (ref, _) in enumerate(ranked_cells, start=1):
                        if (ref.row, ref.col) in gold_refs:
                            best = pos
                            break
                    ranked_turns += 1
                    if best is not None:
                        rr_total += 1.0 / best
                        for k in hits:
                            if best <= k:
                                hits[k] += 1
                else:
                    skipped_no_gold += 1
                result = answer_turn(engine, history, mode, active_table_id=table_id)
                scores = tuple(
                    rouge_precision(result.response, turn.response, v) for v in ("1", "2", "L")
                )
                rouge_rows.append(scores)
                dlg_rouge.append(scores)
            prior.append((turn.query, turn.response))
        if dlg_rouge:
            per_dialogue_rouge.append(tuple(np.mean(dlg_rouge, axis=0)))

    metrics: dict[str, float] = {}
    if ranked_turns:
        metrics["cell_mrr@10"] = rr_total / ranked_turns
        for k in (1, 3, 10):
            metrics[f"cell_top{k}"] = hits[k] / ranked_turns
    if rouge_rows:
        means = np.mean(rouge_rows, axis=0)
        metrics["rouge1_p"] = float(means[0])
        metrics["rouge2_p"] = float(means[1])
        metrics["rougeL_p"] = float(means[2])
    details = {
        "mode": mode.value,
        "table_retrieval": table_retrieval,
        "ranked_turns": ranked_turns,
        "turns_without_gold_cells": skipped_no_gold,
    }
    if per_dialogue_rouge:
        dlg_means = np.mean(per_dialogue_rouge, axis=0)
        details["rouge_per_dialogue"] = {
            "rouge1_p": float(dlg_means[0]),
            "rouge2_p": float(dlg_means[1]),
            "rougeL_p": float(dlg_means[2]),
        }
    return MetricReport(metrics=metrics, case_count=len(dialogues), details=details)


def ablation_table(rows: list[tuple[str, str, str, MetricReport]]) -> str:
    """Aligned text table over (table-retrieval, knowledge, generator) rows."""
    header = ("TR", "KR", "RG", "ROUGE-1", "ROUGE-2", "ROUGE-L")
    body = [
        (
            tr,
            kr,
            rg,
            f"{r.metrics.get('rouge1_p', float('nan')):.3f}",
            f"{r.metrics.get('rouge2_p', float('nan')):.3f}",
            f"{r.metrics.get('rougeL_p', float('nan')):.3f}",
        )
        for tr, kr, rg, r in rows
    ]
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(header)]
    fmt = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths))
    return "\n".join([fmt(header)] + [fmt(row) for row in body])
