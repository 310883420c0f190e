"""Readers and writers for every on-disk artifact.

Formats
-------
corpus / queries
    JSON lines, one record per line with ``doc_id``/``text`` (or ``query_id``/``text``).
qrels
    TREC four column ``qid 0 did grade``.
run
    TREC six column ``qid Q0 did rank score tag``.
embeddings
    header ``dim=<d>`` followed by ``id<TAB>v1 v2 ... vd`` rows.
config
    flat ``key = value`` text with ``[section]`` headers.
"""

from __future__ import annotations

import configparser
import json
import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import groupby
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, UnknownIdError, ValidationError

PathLike = str | os.PathLike


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class Qrels:
    """Graded judgments; absent pairs have grade 0."""

    grades: Mapping[tuple[str, str], int]
    overwrites: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "grades", MappingProxyType(dict(self.grades)))
        by_query: dict[str, dict[str, int]] = {}
        for (qid, did), g in self.grades.items():
            if not isinstance(g, int) or g < 0 or g > 3:
                raise ValidationError(f"grade for ({qid}, {did}) must be in 0..3, got {g!r}")
            by_query.setdefault(qid, {})[did] = g
        object.__setattr__(self, "_by_query", by_query)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.grades.get((query_id, doc_id), 0)

    def judged(self, query_id: str) -> dict[str, int]:
        return dict(self._by_query.get(query_id, {}))

    def relevant(self, query_id: str, min_grade: int = 1) -> set[str]:
        return {d for d, g in self._by_query.get(query_id, {}).items() if g >= min_grade}

    def query_ids(self) -> list[str]:
        return sorted(self._by_query)


@dataclass(frozen=True)
class EmbeddingTable:
    """Dense vectors for documents and, optionally, queries.

    Row order follows the input order; lookups go through ``doc_index`` and
    ``query_index``.
    """

    dim: int
    doc_ids: tuple[str, ...]
    doc_vectors: np.ndarray
    query_ids: tuple[str, ...] = ()
    query_vectors: np.ndarray | None = None
    doc_index: Mapping[str, int] = field(init=False, repr=False)
    query_index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        docs = _frozen_matrix(self.doc_vectors, len(self.doc_ids), self.dim, "document")
        object.__setattr__(self, "doc_vectors", docs)
        object.__setattr__(self, "doc_index", _index_of(self.doc_ids, "document"))
        if self.query_vectors is None:
            object.__setattr__(self, "query_vectors", np.zeros((0, self.dim)))
        qv = _frozen_matrix(self.query_vectors, len(self.query_ids), self.dim, "query")
        object.__setattr__(self, "query_vectors", qv)
        object.__setattr__(self, "query_index", _index_of(self.query_ids, "query"))

    def doc_vector(self, doc_id: str) -> np.ndarray:
        try:
            return self.doc_vectors[self.doc_index[doc_id]]
        except KeyError:
            raise UnknownIdError(f"no embedding for document {doc_id!r}") from None

    def query_vector(self, query_id: str) -> np.ndarray:
        try:
            return self.query_vectors[self.query_index[query_id]]
        except KeyError:
            raise UnknownIdError(f"no embedding for query {query_id!r}") from None

    def with_queries(self, query_ids: Sequence[str], vectors: np.ndarray) -> "EmbeddingTable":
        return EmbeddingTable(self.dim, self.doc_ids, self.doc_vectors, tuple(query_ids), vectors)


def _frozen_matrix(values, rows: int, dim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(rows, dim) if rows else np.zeros((0, dim))
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"non-finite {what} embedding value")
    arr.setflags(write=False)
    return arr


def _index_of(ids: Sequence[str], what: str) -> Mapping[str, int]:
    index: dict[str, int] = {}
    for i, key in enumerate(ids):
        if key in index:
            raise ValidationError(f"duplicate {what} id {key!r}")
        index[key] = i
    return MappingProxyType(index)


# ---------------------------------------------------------------------------
# corpus and queries


def _read_records(path: PathLike, id_field: str) -> list[tuple[str, str]]:
    records: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key, text = obj[id_field], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed record ({exc})", line=lineno, path=str(path)) from None
            if not isinstance(key, str) or not isinstance(text, str):
                raise ParseError(f"{id_field} and text must be strings", line=lineno, path=str(path))
            if not text.strip():
                raise ValidationError(f"{path}:{lineno}: empty text for {key!r}")
            if key in seen:
                raise ValidationError(f"duplicate {id_field} {key!r} at line {lineno}")
            seen.add(key)
            records.append((key, text))
    return records


def _write_records(path: PathLike, id_field: str, rows: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, text in rows:
            fh.write(json.dumps({id_field: key, "text": text}, ensure_ascii=False) + "\n")


def load_corpus(path: PathLike) -> list[Document]:
    return [Document(k, t) for k, t in _read_records(path, "doc_id")]


def write_corpus(docs: Iterable[Document], path: PathLike) -> None:
    _write_records(path, "doc_id", ((d.doc_id, d.text) for d in docs))


def load_queries(path: PathLike) -> list[Query]:
    return [Query(k, t) for k, t in _read_records(path, "query_id")]


def write_queries(queries: Iterable[Query], path: PathLike) -> None:
    _write_records(path, "query_id", ((q.query_id, q.text) for q in queries))


# ---------------------------------------------------------------------------
# qrels


def load_qrels(path: PathLike) -> Qrels:
    """Read TREC qrels. A repeated pair keeps the last grade and bumps ``overwrites``."""
    grades: dict[tuple[str, str], int] = {}
    overwrites = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"expected 4 columns, got {len(parts)}", line=lineno, path=str(path))
            qid, _, did, raw = parts
            try:
                grade = int(raw)
            except ValueError:
                raise ParseError(f"non-integer grade {raw!r}", line=lineno, path=str(path)) from None
            if (qid, did) in grades:
                overwrites += 1
            grades[(qid, did)] = grade
    return Qrels(grades, overwrites)


def write_qrels(qrels: Qrels, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (qid, did), g in sorted(qrels.grades.items()):
            fh.write(f"{qid} 0 {did} {g}\n")


# ---------------------------------------------------------------------------
# runs


def validate_run(entries: Sequence[RunEntry]) -> None:
    """Check the rank/score/tie invariants, query by query."""
    by_query: OrderedDict[str, list[RunEntry]] = OrderedDict()
    for e in entries:
        by_query.setdefault(e.query_id, []).append(e)
    for qid, rows in by_query.items():
        for expected, e in enumerate(rows, start=1):
            if e.rank != expected:
                raise ValidationError(f"query {qid}: expected rank {expected}, got {e.rank} ({e.doc_id})")
            if not math.isfinite(e.score):
                raise ValidationError(f"query {qid}: non-finite score for {e.doc_id}")
        for prev, cur in zip(rows, rows[1:]):
            if cur.score > prev.score:
                raise ValidationError(f"query {qid}: score increases at rank {cur.rank}")
            if cur.score == prev.score and cur.doc_id < prev.doc_id:
                raise ValidationError(f"query {qid}: tie at rank {cur.rank} not ordered by doc_id")
        if len({e.doc_id for e in rows}) != len(rows):
            raise ValidationError(f"query {qid}: duplicate doc_id in run")


def write_run(entries: Sequence[RunEntry], path: PathLike) -> None:
    validate_run(entries)
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.query_id} Q0 {e.doc_id} {e.rank} {float(e.score)!r} {e.tag}\n")


def load_run(path: PathLike) -> list[RunEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(f"expected 6 columns, got {len(parts)}", line=lineno, path=str(path))
            qid, _, did, rank, score, tag = parts
            try:
                entries.append(RunEntry(qid, did, int(rank), float(score), tag))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=str(path)) from None
    return entries


def run_by_query(entries: Iterable[RunEntry]) -> dict[str, list[str]]:
    """Ranked doc ids per query, in rank order."""
    ordered = sorted(entries, key=lambda e: (e.query_id, e.rank))
    return {qid: [e.doc_id for e in grp] for qid, grp in groupby(ordered, key=lambda e: e.query_id)}


def ranked_to_entries(query_id: str, ranked: Sequence[tuple[str, float]], tag: str) -> list[RunEntry]:
    return [RunEntry(query_id, did, i, float(s), tag) for i, (did, s) in enumerate(ranked, start=1)]


# ---------------------------------------------------------------------------
# embeddings


def _read_vectors(path: PathLike) -> tuple[int, list[str], list[list[float]]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ParseError("first line must be dim=<d>", line=1, path=str(path))
        try:
            dim = int(header[4:])
        except ValueError:
            raise ParseError(f"bad dimension {header[4:]!r}", line=1, path=str(path)) from None
        if dim < 1:
            raise ValidationError(f"{path}: dim must be positive")
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            key, sep, rest = line.partition("\t")
            if not sep:
                raise ParseError("expected id<TAB>values", line=lineno, path=str(path))
            try:
                vec = [float(v) for v in rest.split()]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=str(path)) from None
            if len(vec) != dim:
                raise ValidationError(f"{path}:{lineno}: row {key!r} has {len(vec)} values, dim={dim}")
            if not all(math.isfinite(v) for v in vec):
                raise ValidationError(f"{path}:{lineno}: non-finite value in row {key!r}")
            ids.append(key)
            rows.append(vec)
    return dim, ids, rows


def load_embeddings(path: PathLike, queries_path: PathLike | None = None) -> EmbeddingTable:
    """Load document vectors and, optionally, query vectors from a second file."""
    dim, ids, rows = _read_vectors(path)
    table = EmbeddingTable(dim, tuple(ids), np.array(rows).reshape(len(rows), dim))
    if queries_path is not None:
        qdim, qids, qrows = _read_vectors(queries_path)
        if qdim != dim:
            raise ValidationError(f"query embedding dim {qdim} != document dim {dim}")
        table = table.with_queries(qids, np.array(qrows).reshape(len(qrows), dim))
    return table


def _write_vectors(path: PathLike, dim: int, ids: Sequence[str], matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dim}\n")
        for key, row in zip(ids, matrix):
            fh.write(key + "\t" + " ".join(repr(float(v)) for v in row) + "\n")


def write_embeddings(table: EmbeddingTable, path: PathLike, queries_path: PathLike | None = None) -> None:
    _write_vectors(path, table.dim, table.doc_ids, table.doc_vectors)
    if queries_path is not None:
        _write_vectors(queries_path, table.dim, table.query_ids, table.query_vectors)


# ---------------------------------------------------------------------------
# config


def load_config(path: PathLike) -> dict[str, dict[str, str]]:
    """Parse a ``[section]`` / ``key = value`` file into nested dicts."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(str(exc), path=str(path)) from None
    return {name: dict(parser[name]) for name in parser.sections()}
