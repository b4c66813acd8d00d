"""Construct and augment the diagnostic knowledge graph from an EHR corpus.

Construction has two modes:

* explicit labels — every diagnosed record carries category + subcategory,
  so the hierarchy is taken verbatim and no clustering runs;
* clustering — disease centroids (renormalized means of their records'
  embeddings) are agglomerated under cosine distance, and the dendrogram is
  cut at two levels to synthesize subcategories and categories.

Either way the result is deterministic: same corpus + config gives a
byte-identical serialized graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from ..corpus import Corpus, EhrRecord
from ..embedding import EmbeddingVector, cosine_similarity, renormalized_mean
from ..errors import (
    AugmenterUnavailable,
    ExtractorUnavailable,
    InconsistentHierarchy,
    InvalidThresholds,
    LlmUnavailable,
    NoLabeledRecords,
)
from .cluster import agglomerative_partitions
from .model import DEFAULT_RELATION, DiagnosticKG, KgNode, canonical_edge, node_id

DEFAULT_DELTA_SUB = 0.25
DEFAULT_DELTA_CAT = 0.45

_FEATURE_SPLIT_RE = re.compile(r"[;,.\n]+")
_MIN_FEATURE_CHARS = 3


@dataclass(frozen=True)
class KgConfig:
    """Build knobs. Threshold defaults are tunable, not canonical."""

    delta_sub: float = DEFAULT_DELTA_SUB
    delta_cat: float = DEFAULT_DELTA_CAT
    mode: str = "auto"  # "auto" | "cluster" | "labels"
    relation: str = DEFAULT_RELATION


class FeatureExtractor(Protocol):
    def extract(self, disease_label: str, manifestation_text: str) -> Sequence[str]: ...


class RuleBasedExtractor:
    """Split manifestation text on ';', ',', '.' and newlines; drop short scraps."""

    def extract(self, disease_label: str, manifestation_text: str) -> list[str]:
        parts = _FEATURE_SPLIT_RE.split(manifestation_text)
        return [p for p in (part.strip() for part in parts) if len(p) >= _MIN_FEATURE_CHARS]


class LlmFeatureExtractor:
    """Feature decomposition by a language model; one feature per output line."""

    def __init__(self, llm):
        self._llm = llm

    def extract(self, disease_label: str, manifestation_text: str) -> list[str]:
        prompt = (
            "Decompose the following clinical manifestation into atomic "
            f"symptom or sign phrases for the disease '{disease_label}'. "
            "Output one phrase per line with no numbering or commentary.\n\n"
            f"{manifestation_text}"
        )
        try:
            raw = self._llm.complete([{"role": "user", "content": prompt}])
        except LlmUnavailable as exc:
            raise ExtractorUnavailable(str(exc)) from exc
        return [line for line in (l.strip() for l in raw.splitlines()) if line]


def normalize_feature(label: str) -> str:
    return label.strip().lower()


def decompose_features(
    disease_label: str,
    manifestation_texts: Sequence[str],
    extractor: FeatureExtractor | None = None,
) -> list[str]:
    """Deduplicated, normalized feature labels for one disease.

    First-occurrence order is kept so the result is deterministic for the
    rule-based extractor.
    """
    if not manifestation_texts:
        raise ValueError("at least one manifestation text is required")
    extractor = extractor or RuleBasedExtractor()
    seen: set[str] = set()
    features: list[str] = []
    for text in manifestation_texts:
        for raw in extractor.extract(disease_label, text):
            label = normalize_feature(raw)
            if label and label not in seen:
                seen.add(label)
                features.append(label)
    return features


def _group_by_diagnosis(records: Sequence[EhrRecord]) -> dict[str, list[EhrRecord]]:
    groups: dict[str, list[EhrRecord]] = {}
    for rec in records:
        assert rec.diagnosis is not None
        groups.setdefault(rec.diagnosis, []).append(rec)
    return groups


def _hierarchy_from_labels(groups: dict[str, list[EhrRecord]]) -> dict[str, tuple[str, str]]:
    """disease label → (subcategory label, category label), all verbatim."""
    placement: dict[str, tuple[str, str]] = {}
    for disease, records in groups.items():
        pairs = {(rec.subcategory, rec.category) for rec in records}
        if len(pairs) > 1:
            shown = sorted(pairs, key=lambda p: (p[0] or "", p[1] or ""))
            raise InconsistentHierarchy(
                f"disease {disease!r} is placed under multiple category/subcategory pairs: {shown}"
            )
        subcategory, category = next(iter(pairs))
        if subcategory is None or category is None:
            raise InconsistentHierarchy(
                f"disease {disease!r} has records without complete hierarchy labels"
            )
        placement[disease] = (subcategory, category)
    seen_sub_parent: dict[str, str] = {}
    for disease, (subcategory, category) in placement.items():
        prior = seen_sub_parent.setdefault(subcategory, category)
        if prior != category:
            raise InconsistentHierarchy(
                f"subcategory {subcategory!r} appears under both {prior!r} and {category!r}"
            )
    return placement


def _hierarchy_from_clustering(
    disease_labels: list[str],
    centroids: dict[str, EmbeddingVector],
    config: KgConfig,
) -> dict[str, tuple[str, str]]:
    """Synthesize subcategory/category labels by cutting the dendrogram twice."""
    n = len(disease_labels)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = 1.0 - cosine_similarity(centroids[disease_labels[i]], centroids[disease_labels[j]])
            dist[i, j] = dist[j, i] = max(0.0, d)
    sub_partition, cat_partition = agglomerative_partitions(
        dist, [config.delta_sub, config.delta_cat]
    )

    def name_clusters(partition: list[list[int]], prefix: str) -> dict[int, str]:
        ordered = sorted(partition, key=lambda c: [disease_labels[i] for i in c])
        names: dict[int, str] = {}
        for rank, members in enumerate(ordered, start=1):
            for member in members:
                names[member] = f"{prefix}-{rank:02d}"
        return names

    sub_names = name_clusters(sub_partition, "subcategory")
    cat_names = name_clusters(cat_partition, "category")
    return {
        disease_labels[i]: (sub_names[i], cat_names[i]) for i in range(n)
    }


def build_kg(
    corpus: Corpus,
    config: KgConfig | None = None,
    extractor: FeatureExtractor | None = None,
) -> DiagnosticKG:
    """Build the four-tier graph from an embedded corpus."""
    config = config or KgConfig()
    if config.delta_sub >= config.delta_cat:
        raise InvalidThresholds(
            f"delta_sub ({config.delta_sub}) must be below delta_cat ({config.delta_cat})"
        )
    labeled = [rec for rec in corpus.records if rec.diagnosis]
    if not labeled:
        raise NoLabeledRecords("no record carries a diagnosis label")
    for rec in labeled:
        if rec.embedding is None:
            raise ValueError(f"record {rec.id!r} has no embedding; run embed_corpus first")

    groups = _group_by_diagnosis(labeled)
    disease_labels = sorted(groups)
    centroids = {
        label: renormalized_mean([rec.embedding for rec in groups[label]])
        for label in disease_labels
    }

    fully_labeled = all(rec.category and rec.subcategory for rec in labeled)
    mode = config.mode
    if mode == "auto":
        mode = "labels" if fully_labeled else "cluster"
    if mode == "labels":
        placement = _hierarchy_from_labels(groups)
    elif mode == "cluster":
        placement = _hierarchy_from_clustering(disease_labels, centroids, config)
    else:
        raise ValueError(f"unknown KG build mode {config.mode!r}")

    nodes: dict[str, KgNode] = {}
    edges: set[tuple[str, str]] = set()
    relations: dict[tuple[str, str], str] = {}

    sub_children: dict[str, list[str]] = {}
    for disease in disease_labels:
        subcategory, category = placement[disease]
        disease_id = node_id("disease", disease)
        sub_id = node_id("subcategory", subcategory)
        cat_id = node_id("category", category)
        nodes[disease_id] = KgNode(
            id=disease_id, tier="disease", label=disease, centroid=centroids[disease]
        )
        if cat_id not in nodes:
            nodes[cat_id] = KgNode(id=cat_id, tier="category", label=category)
        if sub_id not in nodes:
            nodes[sub_id] = KgNode(id=sub_id, tier="subcategory", label=subcategory)
        sub_children.setdefault(sub_id, []).append(disease)
        edges.add(canonical_edge(disease_id, sub_id))
        edges.add(canonical_edge(sub_id, cat_id))

        texts = [rec.manifestation_text for rec in groups[disease]]
        for feature in decompose_features(disease, texts, extractor):
            feature_id = node_id("feature", feature)
            if feature_id not in nodes:
                nodes[feature_id] = KgNode(id=feature_id, tier="feature", label=feature)
            edge = canonical_edge(disease_id, feature_id)
            edges.add(edge)
            relations[edge] = config.relation

    # Subcategory centroids come from their child diseases, renormalized.
    for sub_id, children in sub_children.items():
        sub = nodes[sub_id]
        nodes[sub_id] = KgNode(
            id=sub.id,
            tier=sub.tier,
            label=sub.label,
            centroid=renormalized_mean([centroids[d] for d in children]),
        )

    kg = DiagnosticKG(
        nodes=nodes.values(), edges=edges, relations=relations, encoder=corpus.encoder
    )
    kg.validate()
    return kg


class Augmenter(Protocol):
    def propose(
        self,
        disease_label: str,
        sibling_labels: Sequence[str],
        existing_features: Mapping[str, frozenset[str]],
    ) -> Sequence[str]: ...


class NoOpAugmenter:
    def propose(self, disease_label, sibling_labels, existing_features):
        return []


class StaticAugmenter:
    """Fixed disease → proposed-feature mapping; the test double."""

    def __init__(self, proposals: Mapping[str, Sequence[str]]):
        self._proposals = {k: list(v) for k, v in proposals.items()}

    def propose(self, disease_label, sibling_labels, existing_features):
        return self._proposals.get(disease_label, [])


class LlmAugmenter:
    """Ask a language model for distinguishing features of a disease."""

    def __init__(self, llm):
        self._llm = llm

    def propose(self, disease_label, sibling_labels, existing_features):
        known = sorted(existing_features.get(disease_label, frozenset()))
        prompt = (
            f"Disease: {disease_label}\n"
            f"Similar diseases in the same group: {', '.join(sibling_labels)}\n"
            f"Already known features: {', '.join(known) if known else '(none)'}\n"
            "List additional features that distinguish this disease from the "
            "similar ones, one per line, no commentary."
        )
        try:
            raw = self._llm.complete([{"role": "user", "content": prompt}])
        except LlmUnavailable as exc:
            raise AugmenterUnavailable(str(exc)) from exc
        return [line for line in (l.strip() for l in raw.splitlines()) if line]


def augment_kg(kg: DiagnosticKG, augmenter: Augmenter) -> DiagnosticKG:
    """Add differentiating features proposed by the augmenter.

    A proposal is accepted only if at least one sibling disease in the same
    subcategory lacks the feature — a feature shared by every sibling cannot
    help tell them apart. Nothing is ever removed.
    """
    nodes = dict(kg.nodes)
    edges = set(kg.edges)
    relations = dict(kg.relations)

    def linked(disease_id: str, feature_id: str) -> bool:
        return canonical_edge(disease_id, feature_id) in edges

    for sub in kg.nodes_in_tier("subcategory"):
        disease_ids = kg.diseases_under(sub.id)
        if len(disease_ids) <= 1:
            continue  # nothing to differentiate
        sibling_labels = [kg.nodes[d].label for d in disease_ids]
        existing = {
            kg.nodes[d].label: frozenset(kg.nodes[f].label for f in kg.features_of(d))
            for d in disease_ids
        }
        for disease_id in disease_ids:
            label = kg.nodes[disease_id].label
            proposals = augmenter.propose(
                label, [s for s in sibling_labels if s != label], existing
            )
            for raw in proposals:
                feature = normalize_feature(raw)
                if not feature:
                    continue
                feature_id = node_id("feature", feature)
                if linked(disease_id, feature_id):
                    continue
                siblings = [d for d in disease_ids if d != disease_id]
                if all(linked(d, feature_id) for d in siblings):
                    continue  # already on every sibling: adds no differentiation
                if feature_id not in nodes:
                    nodes[feature_id] = KgNode(id=feature_id, tier="feature", label=feature)
                edge = canonical_edge(disease_id, feature_id)
                edges.add(edge)
                relations[edge] = DEFAULT_RELATION

    augmented = DiagnosticKG(
        nodes=nodes.values(), edges=edges, relations=relations, encoder=kg.encoder
    )
    augmented.validate()
    return augmented
