"""Persist and restore diagnostic graphs.

File format: one JSON document with ``schema_version``, nodes, edges, and
the edge → relation-label map. Centroids are stored as full-precision float
arrays (Python's repr round-trips doubles exactly), and everything is sorted
before writing so identical graphs serialize to identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..embedding import EmbeddingVector, EncoderDescriptor
from ..errors import KgIoError, SchemaVersionMismatch
from .model import TIERS, DiagnosticKG, KgNode

SCHEMA_VERSION = 1
_TIER_RANK = {tier: rank for rank, tier in enumerate(TIERS)}


def to_canonical_bytes(kg: DiagnosticKG) -> bytes:
    """Deterministic serialized form; equality of graphs is equality of bytes."""
    nodes = sorted(kg.nodes.values(), key=lambda n: (_TIER_RANK[n.tier], n.id))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "encoder": (
            {
                "name": kg.encoder.name,
                "dimension": kg.encoder.dimension,
                "kind": kg.encoder.kind,
            }
            if kg.encoder
            else None
        ),
        "nodes": [
            {
                "id": n.id,
                "tier": n.tier,
                "label": n.label,
                "centroid": list(n.centroid.values) if n.centroid else None,
            }
            for n in nodes
        ],
        "edges": sorted([list(edge) for edge in kg.edges]),
        "relations": {
            json.dumps(list(edge)): label for edge, label in sorted(kg.relations.items())
        },
    }
    return (json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")


def save_kg(kg: DiagnosticKG, path: str | Path) -> None:
    Path(path).write_bytes(to_canonical_bytes(kg))


def load_kg(path: str | Path) -> DiagnosticKG:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KgIoError(f"{path}: invalid JSON at position {exc.pos}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise KgIoError(f"{path}: expected a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: schema version {version!r}, this build reads {SCHEMA_VERSION}"
        )
    encoder = None
    if payload.get("encoder"):
        enc = payload["encoder"]
        encoder = EncoderDescriptor(name=enc["name"], dimension=enc["dimension"], kind=enc["kind"])
    try:
        nodes = []
        for obj in payload["nodes"]:
            centroid = None
            if obj.get("centroid") is not None:
                centroid = EmbeddingVector(
                    values=tuple(float(v) for v in obj["centroid"]),
                    normalized=False,
                    encoder=encoder.name if encoder else None,
                )
            nodes.append(
                KgNode(id=obj["id"], tier=obj["tier"], label=obj["label"], centroid=centroid)
            )
        edges = [tuple(edge) for edge in payload["edges"]]
        relations = {
            tuple(json.loads(key)): label for key, label in payload.get("relations", {}).items()
        }
        kg = DiagnosticKG(nodes=nodes, edges=edges, relations=relations, encoder=encoder)
        kg.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise KgIoError(f"{path}: malformed graph payload: {exc}") from exc
    return kg
