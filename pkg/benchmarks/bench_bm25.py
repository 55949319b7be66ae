"""Throughput comparison of the compiled BM25 kernel vs the numpy fallback.

Run: python3 benchmarks/bench_bm25.py [--docs N] [--queries N]
Both backends share the same accumulation arithmetic, so scores must agree
bit for bit; the benchmark asserts that while timing them.
"""

import argparse
import random
import time

import numpy as np

from ra_ner import kb
from ra_ner.fixtures import synthetic_kb
from ra_ner.kernels import KERNEL_BACKEND, accumulate_bm25, accumulate_bm25_python


def bench(index: kb.Index, queries: list[str], kernel) -> tuple[float, np.ndarray]:
    fi = index.fields["sentence"]
    checksum = np.zeros(1)
    start = time.perf_counter()
    for query in queries:
        scores = np.zeros(fi.num_units)
        for term in kb.analyze(query):
            posting = fi.postings.get(term)
            if posting is None:
                continue
            unit_ids, tfs = posting
            kernel(scores, unit_ids, tfs, fi.unit_lengths,
                   kb.idf(fi.num_units, len(unit_ids)), index.k1, index.b, fi.avgdl)
        checksum += scores.sum()
    return time.perf_counter() - start, checksum


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--queries", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    store = kb.ingest(synthetic_kb(args.docs, seed=args.seed))
    index = kb.build_index(store)
    fi = index.fields["sentence"]
    vocab = sorted(fi.postings)
    rng = random.Random(args.seed)
    queries = [" ".join(rng.choice(vocab) for _ in range(rng.randint(2, 8)))
               for _ in range(args.queries)]

    print(f"active backend: {KERNEL_BACKEND}")
    print(f"{args.docs} docs, {fi.num_units} sentence units, {args.queries} queries")

    # warm up, then interleave to be fair to CPU frequency scaling
    for kernel in (accumulate_bm25, accumulate_bm25_python):
        bench(index, queries[:50], kernel)
    t_c, sum_c = bench(index, queries, accumulate_bm25)
    t_py, sum_py = bench(index, queries, accumulate_bm25_python)
    assert np.array_equal(sum_c, sum_py), "backends disagree"

    print(f"compiled kernel:  {t_c:8.3f} s  ({args.queries / t_c:9.1f} queries/s)")
    print(f"numpy fallback:   {t_py:8.3f} s  ({args.queries / t_py:9.1f} queries/s)")
    print(f"speedup: {t_py / t_c:.2f}x")


if __name__ == "__main__":
    main()
