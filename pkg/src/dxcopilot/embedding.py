"""Text embedding contract, deterministic offline encoder, and cosine similarity.

Two encoder kinds exist behind one contract:

* ``offline-deterministic`` — a hashed bag-of-words encoder. It is a pure
  function (no global state, reproducible across processes) so every desk-scale
  test and the whole offline mode run without network access.
* ``remote-http`` — a thin client for a production embedding service.

Vectors are L2-normalized at encode time, so cosine similarity of encoded
texts reduces to a dot product.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import requests

from .errors import (
    DimensionMismatch,
    EmptyText,
    RemoteEncoderUnavailable,
    ZeroVector,
)

DEFAULT_OFFLINE_DIMENSION = 256

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EncoderDescriptor:
    """Identity of an encoder; vectors and indexes are tagged with it."""

    name: str
    dimension: int
    kind: str  # "offline-deterministic" | "remote-http"

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("encoder dimension must be positive")


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length real vector plus provenance.

    When ``normalized`` is set the Euclidean norm is 1.0 within 1e-6; the
    constructor enforces it so a denormalized vector cannot masquerade.
    """

    values: tuple[float, ...]
    normalized: bool = False
    encoder: str | None = None

    def __post_init__(self):
        if self.normalized:
            norm = math.sqrt(sum(v * v for v in self.values))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"normalized flag set but norm is {norm!r}")

    @property
    def dimension(self) -> int:
        return len(self.values)


class Encoder(Protocol):
    """Anything that turns text into an EmbeddingVector."""

    @property
    def descriptor(self) -> EncoderDescriptor: ...

    def encode(self, text: str) -> EmbeddingVector: ...

    def encode_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


class OfflineEncoder:
    """Hashed bag-of-words encoder.

    Each token is hashed (md5, stable across processes and platforms) to one
    of ``dimension`` buckets, counts accumulate, and the vector is
    L2-normalized. Similar texts share buckets, so similarity survives well
    enough for desk-scale retrieval.
    """

    def __init__(self, dimension: int = DEFAULT_OFFLINE_DIMENSION, name: str = "hashed-bow"):
        self._descriptor = EncoderDescriptor(name=name, dimension=dimension, kind="offline-deterministic")

    @property
    def descriptor(self) -> EncoderDescriptor:
        return self._descriptor

    def encode(self, text: str) -> EmbeddingVector:
        stripped = text.strip()
        if not stripped:
            raise EmptyText("cannot encode empty text")
        return _hashed_bow(stripped, self._descriptor.dimension, self._descriptor.name)

    def encode_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.encode(t) for t in texts]


@lru_cache(maxsize=16384)
def _hashed_bow(stripped: str, dim: int, name: str) -> EmbeddingVector:
    # Pure function of its arguments, so memoizing is free speed: feature
    # labels and evidence snippets are re-encoded constantly during turns.
    counts = [0.0] * dim
    tokens = tokenize(stripped)
    if not tokens:
        # Punctuation-only text: hash the raw string so the vector is
        # still deterministic and non-zero.
        tokens = [stripped.lower()]
    for token in tokens:
        counts[_bucket(token, dim)] += 1.0
    norm = math.sqrt(math.fsum(c * c for c in counts))
    values = tuple(c / norm for c in counts)
    return EmbeddingVector(values=values, normalized=True, encoder=name)


def _bucket(token: str, dimension: int) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dimension


@dataclass
class RemoteEncoderConfig:
    base_url: str
    model: str
    api_token: str | None = None
    timeout_seconds: float = 30.0
    max_retries: int = 2


class RemoteHttpEncoder:
    """Client for a remote embedding service.

    Contract: ``POST {base_url}`` with ``{"input": [texts], "model": model}``
    returns ``{"embeddings": [[float, ...], ...]}``. Responses are
    re-normalized locally so downstream cosine math sees unit vectors.
    """

    def __init__(self, config: RemoteEncoderConfig, dimension: int, name: str | None = None,
                 session: requests.Session | None = None):
        self.config = config
        self._descriptor = EncoderDescriptor(
            name=name or config.model, dimension=dimension, kind="remote-http"
        )
        self._session = session or requests.Session()

    @property
    def descriptor(self) -> EncoderDescriptor:
        return self._descriptor

    def encode(self, text: str) -> EmbeddingVector:
        return self.encode_batch([text])[0]

    def encode_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        for text in texts:
            if not text.strip():
                raise EmptyText("cannot encode empty text")
        if not texts:
            return []
        payload = {"input": list(texts), "model": self.config.model}
        headers = {}
        if self.config.api_token:
            headers["Authorization"] = f"Bearer {self.config.api_token}"
        last_error: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                response = self._session.post(
                    self.config.base_url,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout_seconds,
                )
                response.raise_for_status()
                rows = response.json()["embeddings"]
                return [self._to_vector(row) for row in rows]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        raise RemoteEncoderUnavailable(f"embedding service failed: {last_error}")

    def _to_vector(self, row: Sequence[float]) -> EmbeddingVector:
        if len(row) != self._descriptor.dimension:
            raise DimensionMismatch(
                f"service returned dimension {len(row)}, expected {self._descriptor.dimension}"
            )
        norm = math.sqrt(sum(v * v for v in row))
        if norm == 0.0:
            raise ZeroVector("embedding service returned an all-zero vector")
        values = tuple(float(v) / norm for v in row)
        return EmbeddingVector(values=values, normalized=True, encoder=self._descriptor.name)


def encode(text: str, encoder: Encoder) -> EmbeddingVector:
    """Encode ``text`` with ``encoder``; module-level convenience."""
    return encoder.encode(text)


def renormalized_mean(vectors: Sequence[EmbeddingVector]) -> EmbeddingVector:
    """Element-wise mean of the vectors, re-scaled to unit length.

    Used for disease and subcategory centroids.
    """
    if not vectors:
        raise ValueError("cannot average zero vectors")
    dim = vectors[0].dimension
    encoder = vectors[0].encoder
    acc = [0.0] * dim
    for vec in vectors:
        if vec.dimension != dim:
            raise DimensionMismatch(f"dimensions differ: {vec.dimension} vs {dim}")
        for i, v in enumerate(vec.values):
            acc[i] += v
    n = float(len(vectors))
    mean = [v / n for v in acc]
    norm = math.sqrt(sum(v * v for v in mean))
    if norm == 0.0:
        raise ZeroVector("mean of the vectors is all-zero")
    return EmbeddingVector(
        values=tuple(v / norm for v in mean), normalized=True, encoder=encoder
    )


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, in [-1, 1], symmetric.

    Correctly-rounded sums keep the value independent of term order, so it
    agrees bit-for-bit with the retrieval index's scoring.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions differ: {a.dimension} vs {b.dimension}")
    dot = math.fsum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.fsum(x * x for x in a.values)
    norm_b = math.fsum(y * y for y in b.values)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    # sqrt before multiplying: the product of two tiny squared norms can
    # underflow to zero even when both vectors are nonzero
    denominator = math.sqrt(norm_a) * math.sqrt(norm_b)
    if denominator == 0.0:
        raise ZeroVector("vector norms underflow to zero")
    return max(-1.0, min(1.0, dot / denominator))
