"""Exhaustive top-k cosine index over the EHR corpus.

A deliberate linear scan: desk-scale corpora make approximate structures
pointless, and an exact scan doubles as the reference the rest of the system
is tested against. Ranking is totally ordered — score descending, then
record id ascending — so results are reproducible across platforms.

Scores use correctly-rounded summation (``math.fsum``): two mathematically
equal cosines always come out as the same double no matter how the terms are
ordered, which keeps tie-breaks exact against any independently computed
ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .embedding import EmbeddingVector
from .errors import DimensionMismatch, DuplicateId, EncoderMismatch, ZeroVector


@dataclass(frozen=True)
class ScoredHit:
    record_id: str
    score: float


class VectorIndex:
    """Immutable corpus of id/vector rows; safe for concurrent reads."""

    def __init__(self, ids: list[str], rows: list[tuple[float, ...]], encoder: str | None):
        self._ids = tuple(ids)
        self._rows = rows
        self._norms = [math.sqrt(math.fsum(x * x for x in row)) for row in rows]
        self._encoder = encoder

    @property
    def ids(self) -> tuple[str, ...]:
        """Stored ids in insertion order."""
        return self._ids

    @property
    def encoder(self) -> str | None:
        return self._encoder

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dimension(self) -> int | None:
        return len(self._rows[0]) if self._rows else None


def index_build(records: Iterable[tuple[str, EmbeddingVector]]) -> VectorIndex:
    """Build an immutable index from (record-id, vector) pairs."""
    ids: list[str] = []
    rows: list[tuple[float, ...]] = []
    seen: set[str] = set()
    dimension: int | None = None
    encoder: str | None = None
    for record_id, vector in records:
        if record_id in seen:
            raise DuplicateId(f"record id {record_id!r} appears twice")
        seen.add(record_id)
        if dimension is None:
            dimension = vector.dimension
            encoder = vector.encoder
        elif vector.dimension != dimension:
            raise DimensionMismatch(
                f"record {record_id!r} has dimension {vector.dimension}, expected {dimension}"
            )
        elif vector.encoder != encoder:
            raise EncoderMismatch(
                f"record {record_id!r} was encoded with {vector.encoder!r}, index uses {encoder!r}"
            )
        if all(v == 0.0 for v in vector.values):
            raise ZeroVector(f"record {record_id!r} has an all-zero embedding")
        ids.append(record_id)
        rows.append(vector.values)
    return VectorIndex(ids, rows, encoder)


def top_k(index: VectorIndex, query: EmbeddingVector, k: int) -> list[ScoredHit]:
    """The min(k, corpus) best hits by cosine similarity.

    Ties on score break by ascending record id, so growing k only ever
    extends the previous result.
    """
    if k <= 0:
        raise ValueError("k must be a positive integer")
    if len(index) == 0:
        return []
    if query.dimension != index.dimension:
        raise DimensionMismatch(
            f"query dimension {query.dimension} does not match index dimension {index.dimension}"
        )
    if index.encoder is not None and query.encoder is not None and query.encoder != index.encoder:
        raise EncoderMismatch(
            f"query encoded with {query.encoder!r}, index built with {index.encoder!r}"
        )
    q_norm = math.sqrt(math.fsum(v * v for v in query.values))
    if q_norm == 0.0:
        raise ZeroVector("query embedding is all-zero")
    # Sparse query terms: dropping exact-zero products does not change the
    # correctly-rounded sum, and short texts touch few buckets.
    nonzero = [(i, qv) for i, qv in enumerate(query.values) if qv != 0.0]
    scores: list[float] = []
    for row, row_norm in zip(index._rows, index._norms):
        dot = math.fsum(row[i] * qv for i, qv in nonzero)
        scores.append(max(-1.0, min(1.0, dot / (row_norm * q_norm))))
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.ids[i]))
    return [ScoredHit(record_id=index.ids[i], score=scores[i]) for i in order[: min(k, len(index))]]
