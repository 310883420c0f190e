"""Numpy implementations of the hot loops; used when the compiled core is absent."""

from __future__ import annotations

import numpy as np


def bm25_accumulate(term_ids, weights, indptr, post_doc, post_tf, idf, doc_norm, k1, n_docs):
    out = np.zeros(n_docs, dtype=np.float64)
    k1p1 = k1 + 1.0
    for t, w in zip(term_ids, weights):
        lo, hi = indptr[t], indptr[t + 1]
        if lo == hi:
            continue
        docs = post_doc[lo:hi]
        tf = post_tf[lo:hi]
        out[docs] += (w * idf[t]) * (tf * k1p1) / (tf + doc_norm[docs])
    return out


def set_affinity(cands, indptr, nbr, weight, s_score):
    """Mean edge weight and mean stored score over ``S ∩ N_d`` for each candidate.

    ``s_score`` holds the stored score of members of S and NaN elsewhere.
    """
    cands = np.asarray(cands, dtype=np.int64)
    n = len(cands)
    lo = indptr[cands]
    lens = indptr[cands + 1] - lo
    seg = np.repeat(np.arange(n), lens)
    # flat edge positions: lo[i] + 0..lens[i]-1 for every candidate i
    starts = np.cumsum(lens) - lens
    edges = np.arange(lens.sum()) - np.repeat(starts, lens) + np.repeat(lo, lens)
    s = s_score[nbr[edges]]
    hit = ~np.isnan(s)
    count = np.bincount(seg[hit], minlength=n).astype(np.int64)
    sw = np.bincount(seg[hit], weights=weight[edges][hit], minlength=n)
    ss = np.bincount(seg[hit], weights=s[hit], minlength=n)
    safe = np.maximum(count, 1)
    d2set = np.where(count > 0, sw / safe, 0.0)
    x7 = np.where(count > 0, ss / safe, 0.0)
    return d2set, x7, count
