"""Diagnostic decision-support engine.

Retrieval-augmented reasoning over an EHR corpus, guided by a four-tier
diagnostic knowledge graph, with proactive follow-up questioning during
live consultations. Exposed as a library, HTTP service, CLI, and web
console.
"""

from .corpus import Corpus, EhrRecord, build_index, embed_corpus, ingest, retrieve_similar
from .embedding import (
    EmbeddingVector,
    Encoder,
    EncoderDescriptor,
    OfflineEncoder,
    RemoteHttpEncoder,
    cosine_similarity,
    encode,
)
from .index import ScoredHit, VectorIndex, index_build, top_k
from .kg import (
    DiagnosticKG,
    KgConfig,
    KgNode,
    Triplet,
    augment_kg,
    build_kg,
    decompose_features,
    gather_triplets,
    load_kg,
    match_subcategory,
    save_kg,
)
from .orchestrator import (
    ConsultationSession,
    EvidenceItem,
    FollowUpQuestion,
    PipelineConfig,
    Recommendation,
    SufficiencyVerdict,
    assemble_prompt,
    check_sufficiency,
    detect_mentioned_features,
    formulate_question,
    one_shot,
    run_turn,
    select_critical_feature,
)

__version__ = "0.1.0"
