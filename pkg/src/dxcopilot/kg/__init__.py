"""Four-tier diagnostic knowledge graph: build, augment, query, persist."""

from .build import (
    Augmenter,
    FeatureExtractor,
    KgConfig,
    LlmAugmenter,
    LlmFeatureExtractor,
    NoOpAugmenter,
    RuleBasedExtractor,
    StaticAugmenter,
    augment_kg,
    build_kg,
    decompose_features,
    normalize_feature,
)
from .io import load_kg, save_kg, to_canonical_bytes
from .model import (
    DEFAULT_RELATION,
    TIERS,
    DiagnosticKG,
    KgNode,
    Triplet,
    canonical_edge,
    gather_triplets,
    match_subcategory,
    node_id,
)

__all__ = [
    "Augmenter",
    "DEFAULT_RELATION",
    "DiagnosticKG",
    "FeatureExtractor",
    "KgConfig",
    "KgNode",
    "LlmAugmenter",
    "LlmFeatureExtractor",
    "NoOpAugmenter",
    "RuleBasedExtractor",
    "StaticAugmenter",
    "TIERS",
    "Triplet",
    "augment_kg",
    "build_kg",
    "canonical_edge",
    "decompose_features",
    "gather_triplets",
    "load_kg",
    "match_subcategory",
    "node_id",
    "normalize_feature",
    "save_kg",
    "to_canonical_bytes",
]
