"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each kernel on representative workloads and prints a timing table.
The same fallbacks are what the package uses when GROUNDER_NO_NUMBA=1 is
set (or numba is unavailable).

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from grounder import _kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lcs(rng, repeats):
    a = rng.integers(0, 50, size=600).astype(np.int64)
    b = rng.integers(0, 50, size=600).astype(np.int64)
    return {
        "workload": "lcs_length 600x600",
        "numpy": timeit(lambda: _kernels._lcs_length_np(a, b), repeats),
        "numba": timeit(lambda: _kernels._lcs_length_nb(a, b), repeats)
        if _kernels.USE_NUMBA
        else None,
    }


def bench_adam(rng, repeats):
    n = 2_000_000

    def run(impl):
        param = rng.normal(size=n)
        grad = rng.normal(size=n)
        m = np.zeros(n)
        v = np.zeros(n)
        return lambda: impl(param, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 3)

    return {
        "workload": "adam_update 2M params",
        "numpy": timeit(run(_kernels._adam_update_np), repeats),
        "numba": timeit(run(_kernels._adam_update_nb), repeats)
        if _kernels.USE_NUMBA
        else None,
    }


def bench_bm25(rng, repeats):
    n_docs, n_terms = 20_000, 5_000
    starts = [0]
    docs = []
    tfs = []
    for _ in range(n_terms):
        members = np.sort(rng.choice(n_docs, size=rng.integers(5, 60), replace=False))
        docs.extend(members.tolist())
        tfs.extend(rng.integers(1, 6, size=members.size).astype(float).tolist())
        starts.append(len(docs))
    args = (
        np.array(starts, dtype=np.int64),
        np.array(docs, dtype=np.int64),
        np.array(tfs, dtype=np.float64),
        rng.choice(n_terms, size=8, replace=False).astype(np.int64),
        np.ones(8, dtype=np.float64),
        rng.uniform(0.1, 3.0, size=n_terms),
        rng.integers(5, 200, size=n_docs).astype(np.float64),
        100.0,
        1.5,
        0.75,
    )
    return {
        "workload": "bm25 query, 20k docs",
        "numpy": timeit(lambda: _kernels._bm25_score_query_np(*args), repeats),
        "numba": timeit(lambda: _kernels._bm25_score_query_nb(*args), repeats)
        if _kernels.USE_NUMBA
        else None,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels.USE_NUMBA:
        _kernels.warmup()  # exclude JIT compilation from the timings
    else:
        print("numba path unavailable (GROUNDER_NO_NUMBA set or numba missing); "
              "timing the numpy fallbacks only\n")

    rng = np.random.default_rng(0)
    rows = [
        bench_lcs(rng, args.repeats),
        bench_adam(rng, args.repeats),
        bench_bm25(rng, args.repeats),
    ]
    print(f"{'workload':<24} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for r in rows:
        np_ms = r["numpy"] * 1e3
        if r["numba"] is None:
            print(f"{r['workload']:<24} {np_ms:>8.2f}ms {'-':>10} {'-':>9}")
        else:
            nb_ms = r["numba"] * 1e3
            print(f"{r['workload']:<24} {np_ms:>8.2f}ms {nb_ms:>8.2f}ms {np_ms / nb_ms:>8.1f}x")


if __name__ == "__main__":
    main()
