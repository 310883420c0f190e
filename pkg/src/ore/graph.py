"""Directed top-k affinity graphs over documents (corpus graph and learned affinity graph)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .dense import DenseScorer
from .errors import ParseError, UnknownIdError, ValidationError
from .io import PathLike
from .lexical import InvertedIndex, dd_scores

KINDS = ("lexical", "semantic", "laff")
DEFAULT_K = 8


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    k: int
    adjacency: Mapping[str, tuple[tuple[str, float], ...]]
    kind: str = "laff"
    _csr_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown graph kind {self.kind!r}")
        adj = {}
        for src, edges in self.adjacency.items():
            edges = tuple((d, float(w)) for d, w in edges)
            if len(edges) > self.k:
                raise ValidationError(f"{src!r} has {len(edges)} neighbours, more than k={self.k}")
            for d, w in edges:
                if d == src:
                    raise ValidationError(f"self-edge on {src!r}")
                if not math.isfinite(w):
                    raise ValidationError(f"non-finite weight on edge {src!r}->{d!r}")
            adj[src] = tuple(sorted(edges, key=lambda e: (-e[1], e[0])))
        object.__setattr__(self, "adjacency", MappingProxyType(adj))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffinityGraph):
            return NotImplemented
        return dict(self.adjacency) == dict(other.adjacency)

    def n_edges(self) -> int:
        return sum(len(v) for v in self.adjacency.values())

    def csr(self, doc_pos: Mapping[str, int], n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Adjacency as CSR arrays over the integer positions in ``doc_pos``.

        Nodes or neighbours missing from ``doc_pos`` are dropped.
        """
        key = id(doc_pos)
        hit = self._csr_cache.get(key)
        if hit is not None and hit[0] is doc_pos:
            return hit[1]
        indptr = np.zeros(n + 1, dtype=np.int64)
        rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for src, edges in self.adjacency.items():
            p = doc_pos.get(src)
            if p is None:
                continue
            rows[p] = [(doc_pos[d], w) for d, w in edges if d in doc_pos]
        np.cumsum([len(r) for r in rows], out=indptr[1:])
        nbr = np.array([d for r in rows for d, _ in r], dtype=np.int64)
        weight = np.array([w for r in rows for _, w in r], dtype=np.float64)
        out = (indptr, nbr, weight)
        self._csr_cache[key] = (doc_pos, out)
        return out


def neighbours(graph: AffinityGraph, doc_id: str) -> list[tuple[str, float]]:
    """Out-edges of ``doc_id`` by weight; empty for documents outside the graph."""
    return list(graph.adjacency.get(doc_id, ()))


def _top_k(ids: Sequence[str], scores: np.ndarray, src: int, k: int) -> tuple[tuple[str, float], ...]:
    cand = [i for i in range(len(ids)) if i != src]
    cand.sort(key=lambda i: (-scores[i], ids[i]))
    return tuple((ids[i], float(scores[i])) for i in cand[:k])


def build_graph(source: InvertedIndex | DenseScorer, doc_ids: Sequence[str], k: int = DEFAULT_K) -> AffinityGraph:
    """Top-k neighbours of each document under BM25 doc-as-query or embedding similarity.

    Neighbours are restricted to ``doc_ids``.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    ids = list(doc_ids)
    adjacency: dict[str, tuple[tuple[str, float], ...]] = {}
    if isinstance(source, InvertedIndex):
        pos = np.array([source.position(d) for d in ids], dtype=np.int64)
        for i, d in enumerate(ids):
            adjacency[d] = _top_k(ids, dd_scores(source, d)[pos], i, k)
        return AffinityGraph(k, adjacency, "lexical")
    if isinstance(source, DenseScorer):
        for d in ids:
            if not source.has_doc(d):
                raise UnknownIdError(f"cannot score {d!r}: no embedding")
        mat = source.doc_matrix(ids)
        order_ids = np.array(ids, dtype=object)
        tie = np.argsort(np.argsort(order_ids, kind="stable"), kind="stable")
        for start in range(0, len(ids), 512):
            block = mat[start:start + 512] @ mat.T
            for r, row in enumerate(block):
                i = start + r
                keep = np.flatnonzero(np.arange(len(ids)) != i)
                top = keep[np.lexsort((tie[keep], -row[keep]))][:k]
                adjacency[ids[i]] = tuple((ids[j], float(row[j])) for j in top)
        return AffinityGraph(k, adjacency, "semantic")
    raise ValidationError(f"cannot build a graph from {type(source).__name__}")


def empty_graph(k: int = DEFAULT_K) -> AffinityGraph:
    return AffinityGraph(k, {}, "laff")


def save_graph(graph: AffinityGraph, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for src in sorted(graph.adjacency):
            for dst, w in graph.adjacency[src]:
                fh.write(f"{src}\t{dst}\t{w!r}\n")


def load_graph(path: PathLike, k: int | None = None, kind: str = "laff") -> AffinityGraph:
    """Read ``src<TAB>dst<TAB>weight`` edges. ``k`` defaults to the largest out-degree."""
    adjacency: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected src<TAB>dst<TAB>weight", line=lineno, path=str(path))
            src, dst, raw = parts
            try:
                w = float(raw)
            except ValueError:
                raise ParseError(f"bad weight {raw!r}", line=lineno, path=str(path)) from None
            if src == dst:
                raise ParseError(f"self-edge on {src!r}", line=lineno, path=str(path))
            if not math.isfinite(w):
                raise ParseError(f"non-finite weight {raw!r}", line=lineno, path=str(path))
            adjacency.setdefault(src, []).append((dst, w))
    degree = max((len(v) for v in adjacency.values()), default=1)
    if k is None:
        k = max(degree, 1)
    elif degree > k:
        adjacency = {s: sorted(e, key=lambda x: (-x[1], x[0]))[:k] for s, e in adjacency.items()}
    return AffinityGraph(k, adjacency, kind)
