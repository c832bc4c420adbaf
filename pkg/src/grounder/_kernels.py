"""Hot numeric inner loops: numba-compiled kernels with pure-numpy fallbacks.

Set GROUNDER_NO_NUMBA=1 to force the numpy fallbacks (the benchmark in
benchmarks/bench_kernels.py compares both paths). Both implementations
produce identical results.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("GROUNDER_NO_NUMBA", "") not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


# -- numba kernels ----------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def _lcs_length_nb(a, b):
        n, m = a.shape[0], b.shape[0]
        prev = np.zeros(m + 1, dtype=np.int64)
        curr = np.zeros(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                if a[i - 1] == b[j - 1]:
                    curr[j] = prev[j - 1] + 1
                elif prev[j] >= curr[j - 1]:
                    curr[j] = prev[j]
                else:
                    curr[j] = curr[j - 1]
            prev, curr = curr, prev
        return int(prev[m])

    @njit(cache=True)
    def _adam_update_nb(param, grad, m, v, lr, beta1, beta2, eps, t):
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for i in range(param.shape[0]):
            g = grad[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            param[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)

    @njit(cache=True)
    def _bm25_score_query_nb(
        term_doc_starts,
        posting_docs,
        posting_tfs,
        query_term_rows,
        query_term_counts,
        idf,
        doc_lens,
        avgdl,
        k1,
        b,
    ):
        n_docs = doc_lens.shape[0]
        scores = np.zeros(n_docs, dtype=np.float64)
        for qi in range(query_term_rows.shape[0]):
            row = query_term_rows[qi]
            qcount = query_term_counts[qi]
            w_idf = idf[row]
            for p in range(term_doc_starts[row], term_doc_starts[row + 1]):
                d = posting_docs[p]
                tf = posting_tfs[p]
                denom = tf + k1 * (1.0 - b + b * doc_lens[d] / avgdl)
                scores[d] += qcount * w_idf * tf * (k1 + 1.0) / denom
        return scores


# -- pure-numpy fallbacks ---------------------------------------------------


def _lcs_length_np(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        eq = a[i - 1] == b
        curr = np.zeros(m + 1, dtype=np.int64)
        # the j-loop carries a dependency through curr[j-1]; keep it scalar
        for j in range(1, m + 1):
            if eq[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = prev[j] if prev[j] >= curr[j - 1] else curr[j - 1]
        prev = curr
    return int(prev[m])


def _adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, t):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def _bm25_score_query_np(
    term_doc_starts,
    posting_docs,
    posting_tfs,
    query_term_rows,
    query_term_counts,
    idf,
    doc_lens,
    avgdl,
    k1,
    b,
):
    scores = np.zeros(doc_lens.shape[0], dtype=np.float64)
    norm = k1 * (1.0 - b + b * doc_lens / avgdl)
    for row, qcount in zip(query_term_rows, query_term_counts):
        lo, hi = term_doc_starts[row], term_doc_starts[row + 1]
        docs = posting_docs[lo:hi]
        tfs = posting_tfs[lo:hi]
        contrib = qcount * idf[row] * tfs * (k1 + 1.0) / (tfs + norm[docs])
        np.add.at(scores, docs, contrib)
    return scores


# -- dispatch ---------------------------------------------------------------

if USE_NUMBA:
    _lcs_length_impl = _lcs_length_nb
    adam_update = _adam_update_nb
    bm25_score_query = _bm25_score_query_nb
else:
    _lcs_length_impl = _lcs_length_np
    adam_update = _adam_update_np
    bm25_score_query = _bm25_score_query_np


def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the longest common subsequence of two int64 sequences."""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return 0
    return _lcs_length_impl(a, b)


def warmup() -> None:
    """Trigger JIT compilation of every kernel on tiny inputs."""
    lcs_length(np.array([1, 2], dtype=np.int64), np.array([2, 1], dtype=np.int64))
    adam_update(np.zeros(2), np.ones(2), np.zeros(2), np.zeros(2), 0.0, 0.9, 0.999, 1e-8, 1)
    bm25_score_query(
        np.array([0, 1], dtype=np.int64),
        np.array([0], dtype=np.int64),
        np.array([1.0]),
        np.array([0], dtype=np.int64),
        np.array([1.0]),
        np.array([1.0]),
        np.array([1.0]),
        1.0,
        1.5,
        0.75,
    )
