"""BM25 (Okapi) baseline retriever over linearized tables.

Uses the non-negative idf variant ln(1 + (N - df + 0.5)/(df + 0.5)), so
every score is >= 0. Documents are the same linearized strings the dense
retriever encodes, keeping the sparse/dense comparison fair.

Persisted layout: 4-byte magic "GRDB", version byte, then length-prefixed
sections (params, vocabulary, doc ids, doc lengths, CSR postings).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .corpus import TableDocument, linearize_table
from .ranking import RankedList
from .text_features import tokenize

_MAGIC = b"GRDB"
_VERSION = 1

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75


class Bm25Error(Exception):
    pass


@dataclass
class Bm25Index:
    doc_ids: tuple[str, ...]
    vocab: dict[str, int]  # term -> postings row
    term_doc_starts: np.ndarray  # (n_terms + 1,) int64 CSR offsets
    posting_docs: np.ndarray  # int64 doc positions
    posting_tfs: np.ndarray  # float64 term frequencies
    doc_lens: np.ndarray  # float64 token counts
    idf: np.ndarray  # (n_terms,) float64
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def N(self) -> int:
        return len(self.doc_ids)

    @property
    def avgdl(self) -> float:
        return float(self.doc_lens.mean()) if self.N else 0.0

    def df(self, term: str) -> int:
        row = self.vocab.get(term)
        if row is None:
            return 0
        return int(self.term_doc_starts[row + 1] - self.term_doc_starts[row])


def build_bm25(
    corpus: Sequence[TableDocument],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Bm25Index:
    """Index tokenize(linearize_table(t)) for every table, in corpus order."""
    if not corpus:
        raise Bm25Error("cannot build BM25 over an empty corpus")
    doc_tokens = [tokenize(linearize_table(t)) for t in corpus]
    doc_lens = np.array([len(toks) for toks in doc_tokens], dtype=np.float64)

    vocab: dict[str, int] = {}
    postings: list[list[tuple[int, float]]] = []
    for pos, toks in enumerate(doc_tokens):
        tf: dict[str, int] = {}
        for tok in toks:
            tf[tok] = tf.get(tok, 0) + 1
        for term, count in tf.items():
            row = vocab.setdefault(term, len(postings))
            if row == len(postings):
                postings.append([])
            postings[row].append((pos, float(count)))

    starts = np.zeros(len(postings) + 1, dtype=np.int64)
    for row, plist in enumerate(postings):
        starts[row + 1] = starts[row] + len(plist)
    posting_docs = np.empty(starts[-1], dtype=np.int64)
    posting_tfs = np.empty(starts[-1], dtype=np.float64)
    for row, plist in enumerate(postings):
        for off, (doc, count) in enumerate(plist):
            posting_docs[starts[row] + off] = doc
            posting_tfs[starts[row] + off] = count

    N = len(corpus)
    dfs = np.diff(starts).astype(np.float64)
    idf = np.log(1.0 + (N - dfs + 0.5) / (dfs + 0.5))
    return Bm25Index(
        doc_ids=tuple(t.table_id for t in corpus),
        vocab=vocab,
        term_doc_starts=starts,
        posting_docs=posting_docs,
        posting_tfs=posting_tfs,
        doc_lens=doc_lens,
        idf=idf,
        k1=k1,
        b=b,
    )


def _query_terms(index: Bm25Index, query: str) -> tuple[np.ndarray, np.ndarray]:
    counts: dict[int, float] = {}
    for tok in tokenize(query):
        row = index.vocab.get(tok)
        if row is not None:
            counts[row] = counts.get(row, 0.0) + 1.0
    rows = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
    qcounts = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
    return rows, qcounts


def bm25_score_all(index: Bm25Index, query: str) -> np.ndarray:
    """Score of every document against ``query``, in corpus order."""
    rows, qcounts = _query_terms(index, query)
    if rows.size == 0:
        return np.zeros(index.N, dtype=np.float64)
    return _kernels.bm25_score_query(
        index.term_doc_starts,
        index.posting_docs,
        index.posting_tfs,
        rows,
        qcounts,
        index.idf,
        index.doc_lens,
        index.avgdl,
        index.k1,
        index.b,
    )


def bm25_score(index: Bm25Index, query: str, doc_pos: int) -> float:
    """Score of a single document; mirrors the full-corpus scan."""
    if not 0 <= doc_pos < index.N:
        raise Bm25Error(f"doc_pos {doc_pos} out of range [0, {index.N})")
    return float(bm25_score_all(index, query)[doc_pos])


def bm25_search(index: Bm25Index, query: str, k: int) -> RankedList[str]:
    """Top-k table ids by BM25 score; ties break to ascending corpus position."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = bm25_score_all(index, query)
    k_eff = min(k, index.N)
    order = np.lexsort((np.arange(index.N), -scores))[:k_eff]
    return RankedList(items=tuple((index.doc_ids[i], float(scores[i])) for i in order))


def _write_section(fh, payload: bytes) -> None:
    fh.write(struct.pack("<I", len(payload)))
    fh.write(payload)


def save_bm25(index: Bm25Index, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", _VERSION))
        params = json.dumps({"k1": index.k1, "b": index.b}).encode("utf-8")
        _write_section(fh, params)
        # vocabulary in row order
        terms = sorted(index.vocab, key=index.vocab.get)
        _write_section(fh, "\n".join(terms).encode("utf-8"))
        _write_section(fh, "\n".join(index.doc_ids).encode("utf-8"))
        _write_section(fh, np.ascontiguousarray(index.doc_lens, dtype="<f8").tobytes())
        _write_section(fh, np.ascontiguousarray(index.term_doc_starts, dtype="<i8").tobytes())
        _write_section(fh, np.ascontiguousarray(index.posting_docs, dtype="<i8").tobytes())
        _write_section(fh, np.ascontiguousarray(index.posting_tfs, dtype="<f8").tobytes())


def load_bm25(path: str | Path) -> Bm25Index:
    data = Path(path).read_bytes()
    if len(data) < 5 or data[:4] != _MAGIC:
        raise Bm25Error(f"{path}: not a BM25 index file (bad magic)")
    if data[4] != _VERSION:
        raise Bm25Error(f"{path}: unsupported version {data[4]}")
    off = 5
    sections = []
    while off < len(data):
        if off + 4 > len(data):
            raise Bm25Error(f"{path}: truncated section header")
        (length,) = struct.unpack_from("<I", data, off)
        off += 4
        payload = data[off : off + length]
        if len(payload) != length:
            raise Bm25Error(f"{path}: truncated section")
        off += length
        sections.append(payload)
    if len(sections) != 7:
        raise Bm25Error(f"{path}: expected 7 sections, found {len(sections)}")
    params = json.loads(sections[0].decode("utf-8"))
    terms = sections[1].decode("utf-8").split("\n") if sections[1] else []
    doc_ids = tuple(sections[2].decode("utf-8").split("\n")) if sections[2] else ()
    doc_lens = np.frombuffer(sections[3], dtype="<f8").copy()
    starts = np.frombuffer(sections[4], dtype="<i8").copy()
    posting_docs = np.frombuffer(sections[5], dtype="<i8").copy()
    posting_tfs = np.frombuffer(sections[6], dtype="<f8").copy()
    N = len(doc_ids)
    dfs = np.diff(starts).astype(np.float64)
    idf = np.log(1.0 + (N - dfs + 0.5) / (dfs + 0.5))
    return Bm25Index(
        doc_ids=doc_ids,
        vocab={t: i for i, t in enumerate(terms)},
        term_doc_starts=starts,
        posting_docs=posting_docs,
        posting_tfs=posting_tfs,
        doc_lens=doc_lens,
        idf=idf,
        k1=float(params["k1"]),
        b=float(params["b"]),
    )
