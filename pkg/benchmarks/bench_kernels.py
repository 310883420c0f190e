"""Compare the compiled kernels with the numpy fallback on a synthetic suite.

    python benchmarks/bench_kernels.py [--docs 5000] [--repeat 20]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ore import _kernels_py
from ore.lexical import build_index, tokenize
from ore.synth import SynthSpec, generate

try:
    from ore import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _inputs(n_docs: int, seed: int):
    data = generate(SynthSpec(n_docs=n_docs, n_queries=20, vocab_size=max(5000, n_docs // 2), seed=seed,
                              decoys_per_query=min(180, n_docs // 20)))
    index = build_index(data.corpus)
    terms = sorted({index.term_pos[t] for q in data.queries for t in tokenize(q.text) if t in index.term_pos})
    term_ids = np.array(terms, dtype=np.int64)
    weights = np.ones(len(term_ids))
    bm25_args = (term_ids, weights, index.indptr, index.post_doc, index.post_tf, index.idf, index.doc_norm(),
                 index.k1, index.n_docs)
    indptr, nbr, weight = data.graph.csr(index.doc_pos, index.n_docs)
    rng = np.random.default_rng(seed)
    s_score = np.full(index.n_docs, np.nan)
    s_score[rng.choice(index.n_docs, 10, replace=False)] = rng.normal(size=10)
    cands = np.sort(rng.choice(index.n_docs, min(2000, index.n_docs), replace=False)).astype(np.int64)
    return bm25_args, (cands, indptr, nbr, weight, s_score)


def _time(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)) * 1e3


def _end_to_end(n_docs: int, backend: str) -> float:
    """Wall seconds for one ore-adaptive run over the suite in a fresh interpreter."""
    code = (
        "import time\n"
        "from ore.synth import SynthSpec, generate\n"
        "from ore.lexical import build_index\n"
        "from ore.dense import DenseScorer\n"
        "from ore.collection import Collection\n"
        "from ore.rankers import graded_oracle\n"
        "from ore.pipeline import run_system\n"
        f"d = generate(SynthSpec(n_docs={n_docs}, decoys_per_query=180))\n"
        "coll = Collection.create(build_index(d.corpus), d.queries, DenseScorer(d.embeddings), graph=d.graph)\n"
        "t = time.perf_counter()\n"
        "run_system('ore-adaptive', coll, [q.query_id for q in d.queries], graded_oracle(d.qrels, 0.25), 100, 16)\n"
        "print(time.perf_counter() - t)\n"
    )
    env = dict(os.environ, ORE_PURE_PYTHON="1" if backend == "python" else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--docs", type=int, default=5000)  # the synthetic graph is dense n x n
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    bm25_args, aff_args = _inputs(args.docs, args.seed)
    rows = []
    for name, args_ in (("bm25_accumulate", bm25_args), ("set_affinity", aff_args)):
        py = _time(getattr(_kernels_py, name), args_, args.repeat)
        if _compiled is None:
            rows.append((name, py, float("nan")))
            continue
        ref = getattr(_kernels_py, name)(*args_)
        got = getattr(_compiled, name)(*args_)
        for a, b in zip(ref if isinstance(ref, tuple) else (ref,), got if isinstance(got, tuple) else (got,)):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        rows.append((name, py, _time(getattr(_compiled, name), args_, args.repeat)))

    print(f"{'kernel':<18}{'numpy ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, py, cc in rows:
        print(f"{name:<18}{py:>12.3f}{cc:>14.3f}{py / cc if cc == cc else float('nan'):>10.1f}")
    if _compiled is not None:
        py = _end_to_end(2000, "python")
        cc = _end_to_end(2000, "compiled")
        print(f"{'ore-adaptive run':<18}{py * 1e3:>12.1f}{cc * 1e3:>14.1f}{py / cc:>10.1f}   (50 queries, 2000 docs)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
