"""Relevance-estimation features.

Hybrid setup, per candidate ``d``::

    x1  BM25(q, d)
    x2  dense similarity(q, d)
    x3  BM25 of d against the RM3-expanded query q'
    x4  mean over d' in S of score(d') * dense similarity(d, d')

Adaptive setup, per candidate ``d`` with ``N_d`` its out-neighbours in the
affinity graph::

    x1  BM25(q, d)
    x2  mean edge weight over S ∩ N_d
    x3  mean stored score over S ∩ N_d

``S`` is the top-``s`` set of ranker-scored documents and a document's stored
score is ``phi + psi``. A feature that cannot be computed (missing embedding,
empty ``S``, empty intersection) is 0 and masked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .dense import DenseScorer
from .graph import AffinityGraph, neighbours
from .lexical import ExpandedQuery, InvertedIndex, bm25_expanded, bm25_qd

HYBRID = "hybrid"
ADAPTIVE = "adaptive"
DIMS = {HYBRID: 4, ADAPTIVE: 3}
NAMES = {
    HYBRID: ("bm25", "dense", "rm3", "set_dense"),
    ADAPTIVE: ("bm25", "set_affinity", "set_score"),
}


@dataclass(frozen=True)
class FeatureVector:
    setup: str
    values: np.ndarray
    mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (DIMS[self.setup],) or len(self.mask) != DIMS[self.setup]:
            raise ValueError(f"{self.setup} feature vectors have {DIMS[self.setup]} entries")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        values = np.where(np.array(self.mask), values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


class ScoredSet:
    """The ``s`` best ranker-scored documents, by stored score then doc_id."""

    def __init__(self, scored: Mapping[str, float], capacity: int) -> None:
        self.capacity = capacity
        best = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[:capacity]
        self.entries: tuple[tuple[str, float], ...] = tuple(best)
        self.scores = dict(best)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.scores

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]


# ---------------------------------------------------------------------------
# single-document features


def q2daff_hybrid(lex: InvertedIndex, dense: DenseScorer | None, query_id: str, query_tokens: Sequence[str],
                  doc_id: str) -> tuple[tuple[float, float], tuple[bool, bool]]:
    x1 = bm25_qd(lex, query_tokens, doc_id)
    if dense is None or not dense.has_doc(doc_id) or query_id not in dense.table.query_index:
        return (x1, 0.0), (True, False)
    return (x1, dense.sim_qd(query_id, doc_id)), (True, True)


def d2setaff_hybrid(lex: InvertedIndex, dense: DenseScorer | None, expanded: ExpandedQuery | None, doc_id: str,
                    scored_set: ScoredSet) -> tuple[tuple[float, float], tuple[bool, bool]]:
    x3, m3 = (bm25_expanded(lex, expanded, doc_id), True) if expanded is not None else (0.0, False)
    if len(scored_set) == 0 or dense is None or not dense.has_doc(doc_id):
        return (x3, 0.0), (m3, False)
    members = [(d, s) for d, s in scored_set.entries if dense.has_doc(d)]
    if not members:
        return (x3, 0.0), (m3, False)
    total = sum(s * dense.sim_dd(doc_id, d) for d, s in members)
    return (x3, total / len(members)), (m3, True)


def _intersection(graph: AffinityGraph, doc_id: str, scored_set: ScoredSet) -> list[tuple[str, float]]:
    return [(d, w) for d, w in neighbours(graph, doc_id) if d in scored_set]


def d2setaff_adaptive(graph: AffinityGraph, doc_id: str, scored_set: ScoredSet) -> tuple[float, bool]:
    """Mean edge weight from ``doc_id`` to its neighbours that are in ``S``."""
    hit = _intersection(graph, doc_id, scored_set)
    if not hit:
        return 0.0, False
    return sum(w for _, w in hit) / len(hit), True


def x7(doc_id: str, scored_set: ScoredSet, graph: AffinityGraph) -> tuple[float, bool]:
    """Mean stored score of ``doc_id``'s neighbours that are in ``S``."""
    hit = _intersection(graph, doc_id, scored_set)
    if not hit:
        return 0.0, False
    return sum(scored_set.scores[d] for d, _ in hit) / len(hit), True


# ---------------------------------------------------------------------------
# normalisation and assembly


@dataclass
class Normalizer:
    """Running per-feature min/max over every unmasked raw value seen for one query."""

    dim: int
    lo: np.ndarray = field(init=False)
    hi: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.lo = np.full(self.dim, np.inf)
        self.hi = np.full(self.dim, -np.inf)

    def update(self, raw: np.ndarray, mask: np.ndarray) -> None:
        raw = np.atleast_2d(raw)
        mask = np.atleast_2d(mask)
        lo = np.where(mask, raw, np.inf).min(axis=0, initial=np.inf)
        hi = np.where(mask, raw, -np.inf).max(axis=0, initial=-np.inf)
        self.lo = np.minimum(self.lo, lo)
        self.hi = np.maximum(self.hi, hi)

    def transform(self, raw: np.ndarray, mask: np.ndarray) -> np.ndarray:
        raw = np.atleast_2d(raw)
        mask = np.atleast_2d(mask)
        span = self.hi - self.lo
        ok = np.isfinite(span) & (span > 0)
        safe_span = np.where(ok, span, 1.0)
        safe_lo = np.where(np.isfinite(self.lo), self.lo, 0.0)
        out = np.where(ok, (raw - safe_lo) / safe_span, 0.0)
        return np.clip(np.where(mask, out, 0.0), 0.0, 1.0)


def assemble(setup: str, raw: Sequence[float], mask: Sequence[bool], normalizer: Normalizer,
             update: bool = True) -> FeatureVector:
    raw_arr = np.asarray(raw, dtype=np.float64)
    mask_arr = np.asarray(mask, dtype=bool)
    if update:
        normalizer.update(raw_arr, mask_arr)
    return FeatureVector(setup, normalizer.transform(raw_arr, mask_arr)[0], tuple(bool(m) for m in mask_arr))


# ---------------------------------------------------------------------------
# batched raw features used by the scheduler


def adaptive_raw(cands: np.ndarray, bm25: np.ndarray, csr: tuple[np.ndarray, np.ndarray, np.ndarray],
                 s_score: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw adaptive features and masks for candidate positions ``cands``.

    ``s_score`` is indexed by document position: the stored score for members
    of S, NaN otherwise.
    """
    indptr, nbr, weight = csr
    d2set, set_score, count = kernels.set_affinity(cands, indptr, nbr, weight, s_score)
    raw = np.column_stack([bm25[cands], d2set, set_score])
    has = count > 0
    mask = np.column_stack([np.ones(len(cands), dtype=bool), has, has])
    return raw, mask


def hybrid_raw(cands: np.ndarray, bm25: np.ndarray, dense_q: np.ndarray, dense_rows: np.ndarray,
               rm3: np.ndarray | None, dense: DenseScorer | None, set_rows: np.ndarray,
               set_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw hybrid features and masks for candidate positions ``cands``.

    ``dense_rows`` maps document positions to embedding rows (-1 when
    missing); ``set_rows``/``set_scores`` describe the members of S that have
    embeddings.
    """
    n = len(cands)
    rows = dense_rows[cands]
    has_emb = rows >= 0
    x2 = np.where(has_emb, dense_q[np.maximum(rows, 0)], 0.0) if dense is not None else np.zeros(n)
    x3 = rm3[cands] if rm3 is not None else np.zeros(n)
    if dense is not None and len(set_rows):
        mat = dense._docs
        pooled = set_scores @ mat[set_rows]
        x4 = np.where(has_emb, mat[np.maximum(rows, 0)] @ pooled / len(set_rows), 0.0)
        m4 = has_emb
    else:
        x4 = np.zeros(n)
        m4 = np.zeros(n, dtype=bool)
    raw = np.column_stack([bm25[cands], x2, x3, x4])
    mask = np.column_stack([np.ones(n, dtype=bool), has_emb if dense is not None else np.zeros(n, bool),
                            np.full(n, rm3 is not None), m4])
    return raw, mask
