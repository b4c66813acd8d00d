"""Independent oracles and synthetic data generators.

Everything here deliberately avoids the library's own code paths where it
serves as an oracle: rankings are computed with plain-Python arithmetic so
they check the numpy-backed index from the outside.
"""

from __future__ import annotations

import math
import random

from dxcopilot.corpus import Corpus, EhrRecord
from dxcopilot.embedding import EmbeddingVector
from dxcopilot.kg.model import DiagnosticKG, KgNode, canonical_edge, node_id

# --- brute-force retrieval oracle ------------------------------------------


def dot(a, b):
    return math.fsum(x * y for x, y in zip(a, b))


def norm(a):
    return math.sqrt(math.fsum(x * x for x in a))


def brute_force_ranking(rows: list[tuple[str, tuple[float, ...]]], query: tuple[float, ...]) -> list[str]:
    """All record ids sorted by cosine similarity desc, id asc."""
    q_norm = norm(query)
    scored = [(dot(values, query) / (norm(values) * q_norm), rid) for rid, values in rows]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [rid for _, rid in scored]


# --- synthetic corpora -------------------------------------------------------


_BODY_PARTS = [
    "chest", "abdomen", "shoulder", "knee", "wrist", "ankle", "neck", "hip",
    "elbow", "forearm", "thigh", "scalp", "jaw", "flank", "groin", "heel",
]
_QUALITIES = [
    "burning", "stabbing", "dull", "throbbing", "cramping", "shooting",
    "aching", "tingling", "pressing", "tearing", "gnawing", "pulsing",
]
_CONTEXTS = [
    "at night", "after meals", "on exertion", "when resting", "in cold weather",
    "after standing", "while climbing stairs", "during deep breaths",
    "after waking", "in the evening",
]


def synthetic_phrase(rng: random.Random) -> str:
    return f"{rng.choice(_QUALITIES)} {rng.choice(_BODY_PARTS)} pain {rng.choice(_CONTEXTS)}"


def synthetic_text(rng: random.Random, n_phrases: int = 4) -> str:
    return "; ".join(synthetic_phrase(rng) for _ in range(n_phrases))


def synthetic_flat_corpus(rng: random.Random, n_records: int) -> list[tuple[str, str]]:
    """(record-id, manifestation text) pairs, ids zero-padded for stable sorting."""
    width = len(str(n_records))
    return [(f"r{idx:0{width}d}", synthetic_text(rng)) for idx in range(n_records)]


def synthetic_labeled_corpus(
    rng: random.Random,
    n_categories: int = 2,
    subs_per_category: int = 2,
    diseases_per_sub: int = 3,
    records_per_disease: int = 4,
) -> tuple[Corpus, dict[str, tuple[str, str]]]:
    """A fully labeled corpus plus the disease → (subcategory, category) map.

    Each disease owns a distinctive set of phrases; its records sample from
    that set so same-disease records look alike and cross-disease records do
    not.
    """
    records: list[EhrRecord] = []
    hierarchy: dict[str, tuple[str, str]] = {}
    disease_no = 0
    for c in range(n_categories):
        category = f"organ system {c + 1}"
        for s in range(subs_per_category):
            subcategory = f"syndrome group {c + 1}.{s + 1}"
            for _ in range(diseases_per_sub):
                disease_no += 1
                disease = f"condition {disease_no:02d}"
                hierarchy[disease] = (subcategory, category)
                signature = [synthetic_phrase(rng) for _ in range(6)]
                signature.append(f"hallmark sign {disease_no:02d}")
                for r in range(records_per_disease):
                    phrases = rng.sample(signature, 4) + [f"hallmark sign {disease_no:02d}"]
                    records.append(
                        EhrRecord(
                            id=f"rec-{disease_no:02d}-{r}",
                            diagnosis=disease,
                            category=category,
                            subcategory=subcategory,
                            manifestation_text="; ".join(phrases),
                        )
                    )
    return Corpus(records=tuple(records)), hierarchy


# --- hand-built graphs -------------------------------------------------------


def kg_from_incidence(incidence: list[list[int]]) -> tuple[DiagnosticKG, list[str], list[str]]:
    """A one-subcategory graph from a disease × feature incidence matrix."""
    n_diseases = len(incidence)
    n_features = len(incidence[0]) if incidence else 0
    cat_id = node_id("category", "cat")
    sub_id = node_id("subcategory", "sub")
    unit = EmbeddingVector(values=(1.0, 0.0), normalized=True)
    nodes = [
        KgNode(id=cat_id, tier="category", label="cat"),
        KgNode(id=sub_id, tier="subcategory", label="sub", centroid=unit),
    ]
    edges = [canonical_edge(cat_id, sub_id)]
    disease_ids = []
    feature_ids = [node_id("feature", f"f{j:02d}") for j in range(n_features)]
    linked_features = set()
    for i, row in enumerate(incidence):
        d_id = node_id("disease", f"d{i:02d}")
        disease_ids.append(d_id)
        nodes.append(KgNode(id=d_id, tier="disease", label=f"d{i:02d}", centroid=unit))
        edges.append(canonical_edge(d_id, sub_id))
        for j, linked in enumerate(row):
            if linked:
                edges.append(canonical_edge(d_id, feature_ids[j]))
                linked_features.add(j)
    for j in sorted(linked_features):
        nodes.append(KgNode(id=feature_ids[j], tier="feature", label=f"f{j:02d}"))
    kg = DiagnosticKG(nodes=nodes, edges=edges)
    kg.validate()
    return kg, disease_ids, feature_ids


def critical_feature_oracle(incidence: list[list[int]], mentioned: set[int]) -> int | None:
    """Exhaustive scorer for the discriminative-question rule."""
    n_diseases = len(incidence)
    if n_diseases <= 1:
        return None
    n_features = len(incidence[0]) if incidence else 0
    best: tuple[float, int] | None = None
    for j in range(n_features):
        count = sum(incidence[i][j] for i in range(n_diseases))
        if count == 0 or j in mentioned:
            continue
        p = count / n_diseases
        score = p * (1 - p)
        key = (-score, j)
        if best is None or key < best:
            best = key
    return best[1] if best else None
