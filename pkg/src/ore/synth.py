"""Synthetic corpora with planted relevant clusters.

Each query owns one or more clusters of relevant documents. Only a visible
part of every cluster carries the query's terms, so the lexical first stage
can reach it; the rest share cluster terms and a cluster embedding centroid
only, so they are reachable through the affinity graph (or, weakly, through
dense retrieval). Background documents act as decoys: they carry query terms
at random frequencies and push the visible documents down the BM25 list.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import AffinityGraph, save_graph
from .io import (Document, EmbeddingTable, PathLike, Qrels, Query, write_corpus, write_embeddings, write_qrels,
                 write_queries)

FILES = {
    "corpus": "corpus.jsonl",
    "queries": "queries.jsonl",
    "qrels": "qrels.txt",
    "doc_embeddings": "doc_embeddings.tsv",
    "query_embeddings": "query_embeddings.tsv",
    "graph": "graph.tsv",
}


@dataclass(frozen=True)
class SynthSpec:
    n_docs: int = 2000
    n_queries: int = 50
    clusters_per_query: int = 1
    cluster_size: int = 5
    visible_fraction: float = 0.2
    vocab_size: int = 5000
    dim: int = 32
    seed: int = 0
    query_terms: int = 3
    decoys_per_query: int = 120
    doc_length: int = 40
    jitter: float = 0.35  # embedding noise around a cluster centroid
    query_mix: float = 0.3  # weight of the cluster centroid in the query embedding
    term_mix: float = 0.6  # weight of the query-term direction in the query embedding
    term_weight: float = 1.0  # pull of a decoy toward the term direction at full query coverage
    graph_k: int = 8
    graph_noise: float = 0.0  # fraction of graph edges rewired to random documents
    graph_term_share: float = 0.5  # how much query-term overlap the affinity graph sees (0..1)

    def __post_init__(self) -> None:
        if self.cluster_size < 2:
            raise ValidationError("cluster_size must be >= 2")
        if not 0.0 < self.visible_fraction <= 1.0:
            raise ValidationError("visible_fraction must be in (0, 1]")
        if self.n_queries < 1 or self.clusters_per_query < 1:
            raise ValidationError("need at least one query and one cluster per query")
        if self.cluster_size > self.n_docs:
            raise ValidationError(f"cluster_size {self.cluster_size} exceeds n_docs {self.n_docs}")
        if self.n_planted > self.n_docs:
            raise ValidationError(f"{self.n_planted} planted documents do not fit in {self.n_docs}")
        if self.dim < 2 or self.doc_length < 4 or self.query_terms < 1:
            raise ValidationError("dim >= 2, doc_length >= 4 and query_terms >= 1 required")
        if not 0.0 <= self.graph_noise <= 1.0:
            raise ValidationError("graph_noise must be in [0, 1]")
        reserved = self.n_queries * (self.query_terms + self.clusters_per_query * self.cluster_terms)
        if self.vocab_size < reserved + 100:
            raise ValidationError(f"vocab_size {self.vocab_size} too small; need at least {reserved + 100}")

    @property
    def n_planted(self) -> int:
        return self.n_queries * self.clusters_per_query * self.cluster_size

    @property
    def n_visible(self) -> int:
        return max(1, round(self.visible_fraction * self.cluster_size))

    @property
    def cluster_terms(self) -> int:
        return 6


@dataclass
class SynthData:
    spec: SynthSpec
    corpus: list[Document]
    queries: list[Query]
    qrels: Qrels
    embeddings: EmbeddingTable
    graph: AffinityGraph
    clusters: dict[str, list[list[str]]]  # query -> clusters of doc ids
    visible: dict[str, set[str]]  # query -> visible cluster docs


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n == 0, 1.0, n)


def generate(spec: SynthSpec) -> SynthData:
    rng = np.random.default_rng(spec.seed)
    n, nq = spec.n_docs, spec.n_queries
    width = len(str(n - 1))
    doc_ids = [f"d{i:0{width}d}" for i in rng.permutation(n)]
    qwidth = len(str(nq - 1))
    query_ids = [f"q{i:0{qwidth}d}" for i in range(nq)]

    vocab = [f"t{i}" for i in range(spec.vocab_size)]
    cursor = 0

    def take(k: int) -> list[str]:
        nonlocal cursor
        out = vocab[cursor:cursor + k]
        cursor += k
        return out

    q_terms = [take(spec.query_terms) for _ in range(nq)]
    c_terms = [[take(spec.cluster_terms) for _ in range(spec.clusters_per_query)] for _ in range(nq)]
    background = np.array(vocab[cursor:])
    # Zipf-like background distribution
    bg_p = 1.0 / np.arange(1, len(background) + 1) ** 0.8
    bg_p /= bg_p.sum()

    bag: list[list[str]] = [list(rng.choice(background, size=spec.doc_length, p=bg_p)) for _ in range(n)]

    # embeddings: background topics plus one centroid per planted cluster
    n_topics = max(8, n // 100)
    topics = _unit(rng.normal(size=(n_topics, spec.dim)))
    vecs = topics[rng.integers(n_topics, size=n)] + spec.jitter * 2.0 * rng.normal(size=(n, spec.dim)) / np.sqrt(spec.dim)

    slots = rng.permutation(n)
    planted = slots[: spec.n_planted]
    plain = slots[spec.n_planted:] if spec.n_planted < n else slots

    grades: dict[tuple[str, str], int] = {}
    clusters: dict[str, list[list[str]]] = {}
    visible: dict[str, set[str]] = {}
    qvecs = np.zeros((nq, spec.dim))
    shift = np.zeros_like(vecs)
    extra: dict[int, list[str]] = {}  # decoy terms per document, from every query that picked it
    p = 0
    for qi, qid in enumerate(query_ids):
        clusters[qid] = []
        visible[qid] = set()
        centroids = []
        for ci in range(spec.clusters_per_query):
            centroid = _unit(rng.normal(size=spec.dim))
            centroids.append(centroid)
            members = planted[p:p + spec.cluster_size]
            p += spec.cluster_size
            for j, m in enumerate(members):
                words = bag[m][: spec.doc_length - spec.cluster_terms - 2]
                words += list(rng.choice(c_terms[qi][ci], size=spec.cluster_terms + 2))
                if j < spec.n_visible:
                    hits = int(rng.integers(max(1, spec.query_terms - 1), spec.query_terms + 1))
                    words[:hits] = [str(t) for t in rng.choice(q_terms[qi], size=hits, replace=False)]
                    visible[qid].add(doc_ids[m])
                bag[m] = words
                vecs[m] = centroid + spec.jitter * rng.normal(size=spec.dim) / np.sqrt(spec.dim)
                grades[(qid, doc_ids[m])] = int(rng.integers(1, 4))
            clusters[qid].append([doc_ids[m] for m in members])
        # the query's term direction: dense models place documents that mention
        # the query's terms near the query
        term_dir = _unit(rng.normal(size=spec.dim))
        rest = max(0.0, 1.0 - spec.query_mix - spec.term_mix)
        qvecs[qi] = (spec.query_mix * np.mean(centroids, axis=0) + spec.term_mix * term_dir
                     + rest * _unit(rng.normal(size=spec.dim)))

        # decoys: background documents carrying query terms
        k = min(spec.decoys_per_query, len(plain))
        for m in rng.choice(plain, size=k, replace=False):
            extra.setdefault(m, [])
            hits = int(rng.integers(1, spec.query_terms + 1))
            terms = list(rng.choice(q_terms[qi], size=hits, replace=False))
            tf = rng.geometric(0.6, size=hits)
            extra[m].extend(t for t, f in zip(terms, tf) for _ in range(int(f)))
            shift[m] += spec.term_weight * (hits / spec.query_terms) * term_dir

    for m, terms in extra.items():
        bag[m] = bag[m][: max(1, spec.doc_length - len(terms))] + terms
    # the affinity graph sees topical relatedness and, partly, query-term overlap
    base = _unit(vecs + spec.graph_term_share * shift)
    vecs = _unit(vecs + shift)
    qvecs = _unit(qvecs)
    corpus = [Document(doc_ids[i], " ".join(rng.permutation(bag[i]))) for i in range(n)]
    corpus.sort(key=lambda d: d.doc_id)
    queries = [Query(qid, " ".join(q_terms[qi])) for qi, qid in enumerate(query_ids)]
    table = EmbeddingTable(spec.dim, tuple(doc_ids), vecs, tuple(query_ids), qvecs)
    graph = _ideal_graph(spec, doc_ids, base, clusters, rng)
    return SynthData(spec, corpus, queries, Qrels(grades), table, graph, clusters, visible)


def _ideal_graph(spec: SynthSpec, doc_ids: list[str], vecs: np.ndarray, clusters: dict[str, list[list[str]]],
                 rng: np.random.Generator) -> AffinityGraph:
    """Cosine kNN, with every planted document guaranteed at least one cluster-mate."""
    n, k = len(doc_ids), min(spec.graph_k, len(doc_ids) - 1)
    pos = {d: i for i, d in enumerate(doc_ids)}
    sims = vecs @ vecs.T
    np.fill_diagonal(sims, -np.inf)
    top = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    adjacency: dict[str, list[tuple[str, float]]] = {}
    for i in range(n):
        edges = [(doc_ids[j], float(sims[i, j])) for j in top[i]]
        if spec.graph_noise > 0:
            for e in range(len(edges)):
                if rng.random() < spec.graph_noise:
                    j = int(rng.integers(n))
                    if j != i and doc_ids[j] not in {d for d, _ in edges}:
                        edges[e] = (doc_ids[j], float(sims[i, j]))
        adjacency[doc_ids[i]] = edges
    for groups in clusters.values():
        for members in groups:
            for d in members:
                edges = adjacency[d]
                if any(nb in members for nb, _ in edges):
                    continue
                mates = [m for m in members if m != d]
                best = max(mates, key=lambda m: (sims[pos[d], pos[m]], m))
                edges[-1] = (best, float(sims[pos[d], pos[best]]))
    return AffinityGraph(spec.graph_k, adjacency, "laff")


def write_synth(data: SynthData, outdir: PathLike) -> dict[str, str]:
    """Write every artifact into ``outdir``; returns the file paths by role."""
    os.makedirs(outdir, exist_ok=True)
    paths = {role: os.path.join(outdir, name) for role, name in FILES.items()}
    write_corpus(data.corpus, paths["corpus"])
    write_queries(data.queries, paths["queries"])
    write_qrels(data.qrels, paths["qrels"])
    write_embeddings(data.embeddings, paths["doc_embeddings"], paths["query_embeddings"])
    save_graph(data.graph, paths["graph"])
    return paths
