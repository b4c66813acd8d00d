"""Four-tier diagnostic knowledge graph: nodes, invariants, and queries.

Tiers run category → subcategory → disease → feature. The graph is
undirected but tier-stratified: edges only connect adjacent tiers, the
structure above the disease tier is a tree (unique parents), and features
hang off one or more diseases. Disease and subcategory nodes carry centroid
embeddings so patient text can be matched against the hierarchy.

Node ids are ``"{tier}:{label}"`` — deterministic, human-readable, and
naturally ordered by label within a tier, which is the tie-break order used
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from ..embedding import EmbeddingVector, Encoder, EncoderDescriptor, cosine_similarity
from ..errors import EmptyKg, UnknownNode

TIERS = ("category", "subcategory", "disease", "feature")
_TIER_RANK = {tier: rank for rank, tier in enumerate(TIERS)}
DEFAULT_RELATION = "has_feature"

Edge = tuple[str, str]


def node_id(tier: str, label: str) -> str:
    if tier not in _TIER_RANK:
        raise ValueError(f"unknown tier {tier!r}")
    return f"{tier}:{label}"


def canonical_edge(a: str, b: str) -> Edge:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class KgNode:
    id: str
    tier: str
    label: str
    centroid: EmbeddingVector | None = None


@dataclass(frozen=True)
class Triplet:
    """One ⟨disease, relation, feature⟩ statement handed to the LLM."""

    disease: str
    relation: str
    feature: str


class DiagnosticKG:
    """Immutable after construction; safe for concurrent reads."""

    def __init__(
        self,
        nodes: Iterable[KgNode],
        edges: Iterable[Edge],
        relations: Mapping[Edge, str] | None = None,
        encoder: EncoderDescriptor | None = None,
    ):
        self.nodes: dict[str, KgNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValueError(f"duplicate node id {node.id!r}")
            self.nodes[node.id] = node
        self.edges: frozenset[Edge] = frozenset(canonical_edge(*e) for e in edges)
        self.relations: dict[Edge, str] = {
            canonical_edge(*e): label for e, label in (relations or {}).items()
        }
        self.encoder = encoder
        self._adjacency: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for a, b in self.edges:
            self._adjacency[a].append(b)
            self._adjacency[b].append(a)
        for nid in self._adjacency:
            self._adjacency[nid].sort()

    # -- structure queries --------------------------------------------------

    def node(self, nid: str) -> KgNode:
        try:
            return self.nodes[nid]
        except KeyError:
            raise UnknownNode(f"no node {nid!r} in graph") from None

    def neighbors(self, nid: str) -> list[str]:
        self.node(nid)
        return self._adjacency[nid]

    def nodes_in_tier(self, tier: str) -> list[KgNode]:
        """Tier members sorted by node id."""
        return sorted(
            (n for n in self.nodes.values() if n.tier == tier), key=lambda n: n.id
        )

    def parent_of(self, nid: str) -> str:
        """The unique neighbor one tier up (disease → subcategory → category)."""
        node = self.node(nid)
        if node.tier == "category":
            raise UnknownNode(f"{nid!r} is a category; it has no parent")
        upper = TIERS[_TIER_RANK[node.tier] - 1]
        parents = [m for m in self._adjacency[nid] if self.nodes[m].tier == upper]
        if len(parents) != 1:
            raise ValueError(f"{nid!r} has {len(parents)} parents in tier {upper!r}")
        return parents[0]

    def diseases_under(self, subcategory_id: str) -> list[str]:
        node = self.node(subcategory_id)
        if node.tier != "subcategory":
            raise UnknownNode(f"{subcategory_id!r} is not a subcategory")
        return [m for m in self._adjacency[subcategory_id] if self.nodes[m].tier == "disease"]

    def features_of(self, disease_id: str) -> list[str]:
        node = self.node(disease_id)
        if node.tier != "disease":
            raise UnknownNode(f"{disease_id!r} is not a disease")
        return [m for m in self._adjacency[disease_id] if self.nodes[m].tier == "feature"]

    def relation_for(self, a: str, b: str) -> str:
        return self.relations.get(canonical_edge(a, b), DEFAULT_RELATION)

    def tier_counts(self) -> dict[str, int]:
        counts = {tier: 0 for tier in TIERS}
        for node in self.nodes.values():
            counts[node.tier] += 1
        return counts

    # -- invariants -----------------------------------------------------------

    def validate(self) -> None:
        """Raise ValueError on any structural invariant violation."""
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge ({a!r}, {b!r}) references a missing node")
            ra, rb = _TIER_RANK[self.nodes[a].tier], _TIER_RANK[self.nodes[b].tier]
            if abs(ra - rb) != 1:
                raise ValueError(
                    f"edge ({a!r}, {b!r}) connects non-adjacent tiers "
                    f"{self.nodes[a].tier!r} and {self.nodes[b].tier!r}"
                )
        has_disease = any(n.tier == "disease" for n in self.nodes.values())
        if has_disease:
            for tier in ("category", "subcategory"):
                if not any(n.tier == tier for n in self.nodes.values()):
                    raise ValueError(f"diseases exist but tier {tier!r} is empty")
        for node in self.nodes.values():
            if node.tier in ("disease", "subcategory"):
                self.parent_of(node.id)  # raises unless exactly one
            if node.tier == "feature":
                if not any(
                    self.nodes[m].tier == "disease" for m in self._adjacency[node.id]
                ):
                    raise ValueError(f"feature {node.id!r} is linked to no disease")

    # -- derived views ----------------------------------------------------------

    def disease_by_label(self, label: str) -> KgNode | None:
        """Case- and whitespace-insensitive disease lookup."""
        wanted = label.casefold().strip()
        for node in self.nodes_in_tier("disease"):
            if node.label.casefold().strip() == wanted:
                return node
        return None


def match_subcategory(kg: DiagnosticKG, patient_text: str, encoder: Encoder) -> str:
    """The subcategory whose centroid is most similar to the patient text.

    Ties break toward the lower node id.
    """
    subcategories = kg.nodes_in_tier("subcategory")
    if not subcategories:
        raise EmptyKg("graph has no subcategories")
    query = encoder.encode(patient_text)
    best_id: str | None = None
    best_score = float("-inf")
    for sub in subcategories:
        if sub.centroid is None:
            raise ValueError(f"subcategory {sub.id!r} has no centroid")
        score = cosine_similarity(query, sub.centroid)
        if score > best_score:
            best_score = score
            best_id = sub.id
    assert best_id is not None
    return best_id


def gather_triplets(kg: DiagnosticKG, subcategory_id: str) -> list[Triplet]:
    """Every feature–disease edge under the subcategory, deterministically ordered."""
    triplets: list[Triplet] = []
    for disease_id in kg.diseases_under(subcategory_id):
        for feature_id in kg.features_of(disease_id):
            triplets.append(
                Triplet(
                    disease=disease_id,
                    relation=kg.relation_for(disease_id, feature_id),
                    feature=feature_id,
                )
            )
    triplets.sort(key=lambda t: (t.disease, t.feature))
    return triplets
