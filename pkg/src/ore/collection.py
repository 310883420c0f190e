"""Shared, read-only retrieval resources for one corpus."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .dense import DenseScorer
from .errors import UnknownIdError
from .graph import AffinityGraph, empty_graph
from .io import Query
from .lexical import InvertedIndex, score_all, tokenize, top_positive


@dataclass(eq=False)
class Collection:
    """Index, optional dense scorers and affinity graph, and the query set.

    ``dense`` feeds the dense first stage and dense features; ``psi`` is the
    cheap scorer added to every ranker score (``None`` disables it).
    """

    index: InvertedIndex
    queries: Mapping[str, Query]
    dense: DenseScorer | None = None
    psi: DenseScorer | None = None
    graph: AffinityGraph = field(default_factory=empty_graph)

    @classmethod
    def create(cls, index: InvertedIndex, queries: Sequence[Query], dense: DenseScorer | None = None,
               psi: DenseScorer | str | None = "dense", graph: AffinityGraph | None = None) -> "Collection":
        """``psi="dense"`` aliases the main dense scorer."""
        if isinstance(psi, str):
            psi = dense
        return cls(index, {q.query_id: q for q in queries}, dense, psi, graph or empty_graph())

    @property
    def n_docs(self) -> int:
        return self.index.n_docs

    def query(self, query_id: str) -> Query:
        try:
            return self.queries[query_id]
        except KeyError:
            raise UnknownIdError(f"unknown query {query_id!r}") from None

    def tokens(self, query_id: str) -> list[str]:
        return tokenize(self.query(query_id).text)

    def bm25(self, query_id: str) -> np.ndarray:
        return score_all(self.index, self.tokens(query_id))

    def bm25_run(self, query_id: str, depth: int) -> list[tuple[str, float]]:
        return top_positive(self.index.doc_ids, self.bm25(query_id), depth)

    def has_dense_query(self, query_id: str) -> bool:
        return self.dense is not None and query_id in self.dense.table.query_index

    def dense_run(self, query_id: str, depth: int) -> list[tuple[str, float]]:
        """Dense first stage, restricted to indexed documents."""
        if not self.has_dense_query(query_id):
            return []
        pos = self.index.doc_pos
        hits = [(d, s) for d, s in self.dense.retrieve(query_id, len(self.dense.table.doc_ids)) if d in pos]
        return hits[:depth]

    @cached_property
    def dense_rows(self) -> np.ndarray:
        """Embedding row for each index position, -1 when missing."""
        rows = np.full(self.n_docs, -1, dtype=np.int64)
        if self.dense is not None:
            lookup = self.dense.table.doc_index
            for i, d in enumerate(self.index.doc_ids):
                rows[i] = lookup.get(d, -1)
        return rows

    @cached_property
    def graph_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.graph.csr(self.index.doc_pos, self.n_docs)

    def psi_scores(self, query_id: str, doc_ids: Sequence[str]) -> np.ndarray:
        if self.psi is None or query_id not in self.psi.table.query_index:
            return np.zeros(len(doc_ids))
        return np.array([self.psi.sim_qd(query_id, d) if self.psi.has_doc(d) else 0.0 for d in doc_ids])
