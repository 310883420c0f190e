"""Embedding-table scoring: query-doc and doc-doc similarity plus exact kNN."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import UnknownIdError, ValidationError
from .io import EmbeddingTable

METRICS = ("dot", "cosine")


class DenseScorer:
    """Inner-product or cosine similarity over an :class:`EmbeddingTable`."""

    def __init__(self, table: EmbeddingTable, metric: str = "dot") -> None:
        if metric not in METRICS:
            raise ValidationError(f"unknown metric {metric!r}; expected one of {METRICS}")
        self.table = table
        self.metric = metric
        if metric == "cosine":
            self._docs = _unit_rows(table.doc_vectors, table.doc_ids, "document")
            self._queries = _unit_rows(table.query_vectors, table.query_ids, "query")
        else:
            self._docs = table.doc_vectors
            self._queries = table.query_vectors

    @cached_property
    def _tie_rank(self) -> np.ndarray:
        # position of each row in ascending doc_id order
        order = sorted(range(len(self.table.doc_ids)), key=self.table.doc_ids.__getitem__)
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        return rank

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self.table.doc_index

    def _doc_row(self, doc_id: str) -> int:
        try:
            return self.table.doc_index[doc_id]
        except KeyError:
            raise UnknownIdError(f"no embedding for document {doc_id!r}") from None

    def _query_row(self, query_id: str) -> int:
        try:
            return self.table.query_index[query_id]
        except KeyError:
            raise UnknownIdError(f"no embedding for query {query_id!r}") from None

    def sim_qd(self, query_id: str, doc_id: str) -> float:
        return float(self._queries[self._query_row(query_id)] @ self._docs[self._doc_row(doc_id)])

    def sim_dd(self, a: str, b: str) -> float:
        return float(self._docs[self._doc_row(a)] @ self._docs[self._doc_row(b)])

    def query_scores(self, query_id: str) -> np.ndarray:
        """Similarity of the query to every document, in table row order."""
        return self._docs @ self._queries[self._query_row(query_id)]

    def doc_scores(self, doc_id: str) -> np.ndarray:
        return self._docs @ self._docs[self._doc_row(doc_id)]

    def doc_matrix(self, doc_ids) -> np.ndarray:
        return self._docs[[self._doc_row(d) for d in doc_ids]]

    def rank_rows(self, scores: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        """Rows sorted by score descending, ties by ascending doc_id."""
        if rows is None:
            rows = np.arange(len(scores))
        return rows[np.lexsort((self._tie_rank[rows], -scores[rows]))]

    def retrieve(self, query_id: str, depth: int) -> list[tuple[str, float]]:
        scores = self.query_scores(query_id)
        ids = self.table.doc_ids
        return [(ids[r], float(scores[r])) for r in self.rank_rows(scores)[:depth]]

    def knn(self, doc_id: str, k: int) -> list[tuple[str, float]]:
        """The ``k`` most similar other documents, ties by ascending doc_id."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        src = self._doc_row(doc_id)
        scores = self.doc_scores(doc_id)
        rows = np.flatnonzero(np.arange(len(scores)) != src)
        ids = self.table.doc_ids
        return [(ids[r], float(scores[r])) for r in self.rank_rows(scores, rows)[:k]]


def _unit_rows(matrix: np.ndarray, ids, what: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise ValidationError(f"cosine metric needs non-zero vectors; {what} {ids[zero[0]]!r} is zero")
    return matrix / norms[:, None]


def psi(scorer: DenseScorer | None, query_id: str, doc_id: str) -> float:
    """Cheap dual-encoder score added to ranker scores; 0 when no scorer is configured."""
    if scorer is None:
        return 0.0
    return scorer.sim_qd(query_id, doc_id)
