"""EHR corpus: ingestion, validation, persistence, and similarity retrieval.

The interchange format is JSONL, one record per line:

    {"id": str, "diagnosis": str?, "category": str?, "subcategory": str?,
     "demographics": {str: str}?, "manifestation_text": str}

The same format is written back by :func:`save`, and file order is preserved
everywhere — no implicit sorting, so builds and diffs stay deterministic.
Records without a diagnosis are fine for retrieval; KG construction skips them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .embedding import EmbeddingVector, Encoder, EncoderDescriptor
from .errors import DuplicateId, EncoderMismatch, MalformedRecord
from .index import VectorIndex, index_build, top_k

DEFAULT_RETRIEVAL_K = 3  # production default: the three closest EHRs feed the prompt


@dataclass(frozen=True)
class EhrRecord:
    """One electronic health record."""

    id: str
    manifestation_text: str
    diagnosis: str | None = None
    category: str | None = None
    subcategory: str | None = None
    demographics: dict[str, str] | None = None
    embedding: EmbeddingVector | None = None


@dataclass(frozen=True)
class Corpus:
    """Ordered, validated records plus the encoder that embedded them."""

    records: tuple[EhrRecord, ...]
    encoder: EncoderDescriptor | None = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, record_id: str) -> EhrRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)


def _parse_record(obj: object, line_no: int) -> EhrRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record must be a JSON object")
    record_id = obj.get("id")
    if not isinstance(record_id, str) or not record_id:
        raise MalformedRecord(line_no, "id required")
    text = obj.get("manifestation_text")
    if not isinstance(text, str) or not text.strip():
        raise MalformedRecord(line_no, "manifestation_text required")
    optional: dict[str, str | None] = {}
    for key in ("diagnosis", "category", "subcategory"):
        value = obj.get(key)
        if value is not None and not isinstance(value, str):
            raise MalformedRecord(line_no, f"{key} must be a string")
        optional[key] = value
    if optional["subcategory"] and not optional["category"]:
        raise MalformedRecord(line_no, "subcategory present without category")
    demographics = obj.get("demographics")
    if demographics is not None:
        if not isinstance(demographics, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in demographics.items()
        ):
            raise MalformedRecord(line_no, "demographics must map strings to strings")
    return EhrRecord(
        id=record_id,
        manifestation_text=text,
        diagnosis=optional["diagnosis"],
        category=optional["category"],
        subcategory=optional["subcategory"],
        demographics=demographics,
    )


def parse_record_json(payload: str | bytes) -> EhrRecord:
    """Parse a single standalone record (e.g. an uploaded file)."""
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(1, f"invalid JSON: {exc.msg}") from exc
    return _parse_record(obj, 1)


def ingest(path: str | Path) -> Corpus:
    """Load and validate a JSONL corpus file. All-or-nothing."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    records: list[EhrRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
            record = _parse_record(obj, line_no)
            if record.id in seen:
                raise DuplicateId(f"line {line_no}: duplicate record id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return Corpus(records=tuple(records))


def save(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus back as JSONL in record order (embeddings excluded)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for rec in corpus.records:
            obj: dict[str, object] = {"id": rec.id}
            if rec.diagnosis is not None:
                obj["diagnosis"] = rec.diagnosis
            if rec.category is not None:
                obj["category"] = rec.category
            if rec.subcategory is not None:
                obj["subcategory"] = rec.subcategory
            if rec.demographics is not None:
                obj["demographics"] = rec.demographics
            obj["manifestation_text"] = rec.manifestation_text
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def embed_corpus(corpus: Corpus, encoder: Encoder) -> Corpus:
    """Populate every record's embedding. Idempotent for the offline encoder."""
    texts = [rec.manifestation_text for rec in corpus.records]
    vectors = encoder.encode_batch(texts)
    records = tuple(
        replace(rec, embedding=vec) for rec, vec in zip(corpus.records, vectors)
    )
    return Corpus(records=records, encoder=encoder.descriptor)


def build_index(corpus: Corpus) -> VectorIndex:
    """Index every embedded record, in corpus order."""
    pairs = []
    for rec in corpus.records:
        if rec.embedding is None:
            raise ValueError(f"record {rec.id!r} has no embedding; run embed_corpus first")
        pairs.append((rec.id, rec.embedding))
    return index_build(pairs)


def retrieve_similar(
    corpus: Corpus,
    index: VectorIndex,
    patient_text: str,
    encoder: Encoder,
    k: int = DEFAULT_RETRIEVAL_K,
) -> list[tuple[EhrRecord, float]]:
    """The k most similar records to the patient text, with scores."""
    if corpus.encoder is not None and encoder.descriptor.name != corpus.encoder.name:
        raise EncoderMismatch(
            f"corpus embedded with {corpus.encoder.name!r}, query uses {encoder.descriptor.name!r}"
        )
    query = encoder.encode(patient_text)
    by_id = {rec.id: rec for rec in corpus.records}
    return [(by_id[hit.record_id], hit.score) for hit in top_k(index, query, k)]
