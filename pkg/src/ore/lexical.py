"""Inverted index with Okapi BM25 scoring and RM3 query expansion.

Documents are stored in ascending ``doc_id`` order, so integer positions
double as the tie-break order used throughout the package.

BM25 uses the non-negative idf ``ln((N - df + 0.5) / (df + 0.5) + 1)`` and
the usual saturation ``tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))``.
A query contributes each distinct term once per occurrence (query term
frequency acts as a weight), which is also how a document is turned into a
query for doc-to-doc scoring.
"""

from __future__ import annotations

import json
import re
import zlib
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ParseError, UnknownIdError, ValidationError
from .io import Document, PathLike

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

_TOKEN_RE = re.compile(r"[^\W_]+")
_MAGIC = b"ORE-INDEX\x00"
_FORMAT_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit. No stemming."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True, eq=False)
class InvertedIndex:
    doc_ids: tuple[str, ...]
    vocab: tuple[str, ...]
    indptr: np.ndarray  # term -> slice into post_doc / post_tf
    post_doc: np.ndarray
    post_tf: np.ndarray
    doc_indptr: np.ndarray  # doc -> slice into doc_term / doc_tf
    doc_term: np.ndarray
    doc_tf: np.ndarray
    doc_len: np.ndarray
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _norm_cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def doc_pos(self) -> dict[str, int]:
        return {d: i for i, d in enumerate(self.doc_ids)}

    @cached_property
    def term_pos(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocab)}

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @cached_property
    def avg_doc_len(self) -> float:
        return float(self.doc_len.sum() / self.n_docs)

    @cached_property
    def idf(self) -> np.ndarray:
        df = np.diff(self.indptr).astype(np.float64)
        return np.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    @property
    def doc_lengths(self) -> dict[str, int]:
        return {d: int(n) for d, n in zip(self.doc_ids, self.doc_len)}

    @property
    def postings(self) -> dict[str, list[tuple[str, int]]]:
        out = {}
        for t, term in enumerate(self.vocab):
            lo, hi = self.indptr[t], self.indptr[t + 1]
            out[term] = [(self.doc_ids[d], int(f)) for d, f in zip(self.post_doc[lo:hi], self.post_tf[lo:hi])]
        return out

    def term_vector(self, doc_id: str) -> dict[str, int]:
        p = self.position(doc_id)
        lo, hi = self.doc_indptr[p], self.doc_indptr[p + 1]
        return {self.vocab[t]: int(f) for t, f in zip(self.doc_term[lo:hi], self.doc_tf[lo:hi])}

    @property
    def doc_term_vectors(self) -> dict[str, dict[str, int]]:
        return {d: self.term_vector(d) for d in self.doc_ids}

    def position(self, doc_id: str) -> int:
        try:
            return self.doc_pos[doc_id]
        except KeyError:
            raise UnknownIdError(f"document {doc_id!r} is not indexed") from None

    def doc_norm(self, k1: float | None = None, b: float | None = None) -> np.ndarray:
        k1 = self.k1 if k1 is None else k1
        b = self.b if b is None else b
        key = (k1, b)
        norm = self._norm_cache.get(key)
        if norm is None:
            avg = self.avg_doc_len
            ratio = self.doc_len / avg if avg > 0 else np.zeros_like(self.doc_len)
            norm = k1 * (1.0 - b + b * ratio)
            self._norm_cache[key] = norm
        return norm


def build_index(corpus: Iterable[Document], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> InvertedIndex:
    """Tokenize ``corpus`` and build term- and document-major postings."""
    counts: dict[str, Counter] = {}
    for doc in corpus:
        if doc.doc_id in counts:
            raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
        counts[doc.doc_id] = Counter(tokenize(doc.text))
    if not counts:
        raise ValidationError("cannot index an empty corpus")
    return _from_counts(counts, k1, b)


def _from_counts(counts: Mapping[str, Mapping[str, int]], k1: float, b: float) -> InvertedIndex:
    doc_ids = tuple(sorted(counts))
    vocab = tuple(sorted({t for c in counts.values() for t in c}))
    term_pos = {t: i for i, t in enumerate(vocab)}

    doc_indptr = np.zeros(len(doc_ids) + 1, dtype=np.int64)
    doc_term: list[int] = []
    doc_tf: list[float] = []
    for i, d in enumerate(doc_ids):
        for t in sorted(counts[d]):
            doc_term.append(term_pos[t])
            doc_tf.append(counts[d][t])
        doc_indptr[i + 1] = len(doc_term)
    doc_term_arr = np.array(doc_term, dtype=np.int64)
    doc_tf_arr = np.array(doc_tf, dtype=np.float64)
    doc_of_entry = np.repeat(np.arange(len(doc_ids), dtype=np.int64), np.diff(doc_indptr))
    doc_len = np.zeros(len(doc_ids), dtype=np.float64)
    np.add.at(doc_len, doc_of_entry, doc_tf_arr)

    # transpose to term-major; stable sort keeps documents ascending within a term
    order = np.argsort(doc_term_arr, kind="stable")
    post_doc = doc_of_entry[order]
    post_tf = doc_tf_arr[order]
    indptr = np.zeros(len(vocab) + 1, dtype=np.int64)
    np.cumsum(np.bincount(doc_term_arr, minlength=len(vocab)), out=indptr[1:])
    return InvertedIndex(
        doc_ids, vocab, indptr, post_doc, post_tf, doc_indptr, doc_term_arr, doc_tf_arr, doc_len, float(k1), float(b)
    )


# ---------------------------------------------------------------------------
# scoring


def _weighted_terms(index: InvertedIndex, weights: Mapping[str, float]) -> tuple[np.ndarray, np.ndarray]:
    ids, ws = [], []
    for term in sorted(weights):
        t = index.term_pos.get(term)
        if t is not None and weights[term] != 0:
            ids.append(t)
            ws.append(float(weights[term]))
    return np.array(ids, dtype=np.int64), np.array(ws, dtype=np.float64)


def score_weighted(index: InvertedIndex, weights: Mapping[str, float], k1: float | None = None,
                   b: float | None = None) -> np.ndarray:
    """Weighted BM25 of every document (in index order) against ``weights``."""
    k1 = index.k1 if k1 is None else k1
    ids, ws = _weighted_terms(index, weights)
    return kernels.bm25_accumulate(
        ids, ws, index.indptr, index.post_doc, index.post_tf, index.idf, index.doc_norm(k1, b), k1, index.n_docs
    )


def score_all(index: InvertedIndex, query_tokens: Sequence[str], k1: float | None = None,
              b: float | None = None) -> np.ndarray:
    return score_weighted(index, Counter(query_tokens), k1, b)


def bm25_qd(index: InvertedIndex, query_tokens: Sequence[str], doc_id: str, k1: float | None = None,
            b: float | None = None) -> float:
    p = index.position(doc_id)
    return float(score_all(index, query_tokens, k1, b)[p])


def dd_scores(index: InvertedIndex, source_id: str) -> np.ndarray:
    """BM25 of every document against the source document used as a tf-weighted query."""
    return score_weighted(index, index.term_vector(source_id))


def bm25_dd(index: InvertedIndex, source_id: str, target_id: str) -> float:
    p = index.position(target_id)
    return float(dd_scores(index, source_id)[p])


def retrieve(index: InvertedIndex, query_tokens: Sequence[str], depth: int) -> list[tuple[str, float]]:
    """Top ``depth`` documents with a positive score, ties broken by doc_id."""
    scores = score_all(index, query_tokens)
    return top_positive(index.doc_ids, scores, depth)


def top_positive(doc_ids: Sequence[str], scores: np.ndarray, depth: int) -> list[tuple[str, float]]:
    hits = np.flatnonzero(scores > 0)
    # positions follow ascending doc_id, so a stable sort on -score is the tie rule
    order = hits[np.argsort(-scores[hits], kind="stable")][:depth]
    return [(doc_ids[i], float(scores[i])) for i in order]


# ---------------------------------------------------------------------------
# RM3


@dataclass(frozen=True)
class ExpandedQuery:
    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.weights.values()):
            raise ValidationError("expanded query weights must be non-negative")


def rm3_expand(index: InvertedIndex, query_tokens: Sequence[str], feedback_docs: Sequence[str],
               fb_terms: int = 10, orig_weight: float = 0.5) -> ExpandedQuery:
    """Interpolate the query's term distribution with a relevance model of the feedback docs.

    The relevance model averages the maximum-likelihood term distributions of
    the feedback documents (uniform document prior), keeps the ``fb_terms``
    heaviest terms (ties by term) and renormalizes them.
    """
    if not feedback_docs:
        raise ValidationError("RM3 needs at least one feedback document")
    if not 0.0 <= orig_weight <= 1.0:
        raise ValidationError(f"orig_weight must be in [0, 1], got {orig_weight}")
    if fb_terms < 1:
        raise ValidationError("fb_terms must be positive")

    model: dict[str, float] = {}
    for doc_id in feedback_docs:
        tv = index.term_vector(doc_id)
        length = sum(tv.values())
        for term, tf in tv.items():
            model[term] = model.get(term, 0.0) + tf / length / len(feedback_docs)
    top = sorted(model.items(), key=lambda kv: (-kv[1], kv[0]))[:fb_terms]
    mass = sum(w for _, w in top)
    rel = {t: w / mass for t, w in top}

    qcounts = Counter(query_tokens)
    if not qcounts:
        return ExpandedQuery(rel)
    qlen = sum(qcounts.values())
    weights = {t: orig_weight * n / qlen for t, n in qcounts.items()}
    for t, w in rel.items():
        weights[t] = weights.get(t, 0.0) + (1.0 - orig_weight) * w
    return ExpandedQuery(weights)


def bm25_expanded(index: InvertedIndex, expanded: ExpandedQuery, doc_id: str) -> float:
    p = index.position(doc_id)
    return float(score_weighted(index, expanded.weights)[p])


# ---------------------------------------------------------------------------
# persistence


def dumps_index(index: InvertedIndex) -> bytes:
    payload = {
        "k1": index.k1,
        "b": index.b,
        "docs": [[d, index.term_vector(d)] for d in index.doc_ids],
    }
    body = zlib.compress(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8"), 6)
    return _MAGIC + bytes([_FORMAT_VERSION]) + body


def loads_index(blob: bytes) -> InvertedIndex:
    if not blob.startswith(_MAGIC):
        raise ParseError("not an ORE index file (bad magic)")
    version = blob[len(_MAGIC)]
    if version != _FORMAT_VERSION:
        raise ParseError(f"unsupported index format version {version}")
    payload = json.loads(zlib.decompress(blob[len(_MAGIC) + 1:]))
    counts = {d: tv for d, tv in payload["docs"]}
    return _from_counts(counts, payload["k1"], payload["b"])


def save_index(index: InvertedIndex, path: PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_index(index))


def load_index(path: PathLike) -> InvertedIndex:
    with open(path, "rb") as fh:
        return loads_index(fh.read())

