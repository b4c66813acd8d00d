"""Consultation turn loop: sufficiency check, follow-up selection, prompt, LLM.

A turn looks at everything the session has heard so far. If the best
retrieval score clears the sufficiency threshold (or the question budget is
spent, or nothing discriminative is left to ask) the pipeline assembles the
full prompt — evidence, retrieved EHRs, subcategory triplets — and parses
the backbone LLM's reply into a structured recommendation. Otherwise it
picks the unmentioned feature that best splits the candidate diseases and
emits a follow-up question instead.

Failed turns (LLM unreachable, unparseable output) leave the session
exactly as it was; state changes commit only on success.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Protocol, Sequence

from .corpus import Corpus, EhrRecord, retrieve_similar
from .embedding import Encoder, cosine_similarity
from .errors import EmptySession, GeneratorUnavailable, LlmUnavailable, SessionConcluded
from .index import VectorIndex, top_k
from .kg.model import DiagnosticKG, KgNode, Triplet, gather_triplets, match_subcategory
from .llm import LlmClient, Message, parse_recommendation

COLLECTING = "collecting"
AWAITING_ANSWER = "awaiting-answer"
CONCLUDED = "concluded"

EVIDENCE_KINDS = ("utterance", "uploaded-ehr", "typed-query", "answer")

SYSTEM_INSTRUCTION = (
    "You are a clinical decision-support assistant. Weigh the patient "
    "evidence, the retrieved similar health records, and the diagnostic "
    "knowledge triplets, then recommend the single most likely diagnosis "
    "together with treatment and medication suggestions."
)

OUTPUT_FORMAT_INSTRUCTION = (
    "Reply with one fenced JSON object, e.g.\n"
    "```json\n"
    '{"diagnosis": "...", "treatment": "...", "medication": "...", '
    '"follow_up_question": "..."}\n'
    "```\n"
    "Use null for any field you cannot fill. The diagnosis field is required."
)


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable thresholds; defaults are calibrated for the offline encoder."""

    sufficiency_threshold: float = 0.80
    mention_threshold: float = 0.60
    max_rounds: int = 5
    retrieval_k: int = 3


@dataclass(frozen=True)
class EvidenceItem:
    kind: str
    text: str
    timestamp: int

    def __post_init__(self):
        if self.kind not in EVIDENCE_KINDS:
            raise ValueError(f"unknown evidence kind {self.kind!r}")
        if not self.text.strip():
            raise ValueError("evidence text must be non-empty")


class ConsultationSession:
    """Accumulating patient evidence plus the turn-loop state."""

    def __init__(self, session_id: str | None = None):
        self.session_id = session_id or secrets.token_hex(16)
        self.evidence: list[EvidenceItem] = []
        self.status = COLLECTING
        self.asked_features: set[str] = set()
        self.question_rounds_used = 0

    def add_evidence(self, kind: str, text: str) -> EvidenceItem:
        item = EvidenceItem(kind=kind, text=text, timestamp=len(self.evidence))
        self.evidence.append(item)
        if self.status == AWAITING_ANSWER:
            self.status = COLLECTING
        return item

    def combined_text(self) -> str:
        return "\n".join(item.text for item in self.evidence)

    def clone(self) -> "ConsultationSession":
        copy = ConsultationSession(session_id=self.session_id)
        copy.evidence = list(self.evidence)
        copy.status = self.status
        copy.asked_features = set(self.asked_features)
        copy.question_rounds_used = self.question_rounds_used
        return copy


@dataclass(frozen=True)
class SufficiencyVerdict:
    sufficient: bool
    max_score: float
    threshold: float


@dataclass(frozen=True)
class Recommendation:
    diagnosis: str
    treatment: str | None = None
    medication: str | None = None
    follow_up_question: str | None = None
    supporting_ehr_ids: tuple[str, ...] = ()
    supporting_triplets: tuple[Triplet, ...] = ()


@dataclass(frozen=True)
class FollowUpQuestion:
    question: str
    feature_id: str
    verdict: SufficiencyVerdict


TurnResult = Recommendation | FollowUpQuestion


def check_sufficiency(
    session: ConsultationSession,
    index: VectorIndex,
    encoder: Encoder,
    threshold: float,
    k: int = PipelineConfig.retrieval_k,
) -> SufficiencyVerdict:
    """Is the evidence close enough to some known EHR to diagnose now?

    The best retrieval score is compared against the threshold; an exact
    threshold hit counts as sufficient.
    """
    if not session.evidence:
        raise EmptySession("session has no evidence yet")
    query = encoder.encode(session.combined_text())
    hits = top_k(index, query, k) if len(index) else []
    max_score = hits[0].score if hits else -1.0
    return SufficiencyVerdict(
        sufficient=max_score >= threshold, max_score=max_score, threshold=threshold
    )


def detect_mentioned_features(
    session: ConsultationSession,
    kg: DiagnosticKG,
    candidate_diseases: Sequence[str],
    mention_threshold: float,
    encoder: Encoder,
) -> set[str]:
    """Feature ids already covered by the conversation.

    A feature counts as mentioned when any evidence item's embedding is close
    enough to the feature label's embedding, or when it was already asked.
    """
    feature_ids: set[str] = set()
    for disease_id in candidate_diseases:
        feature_ids.update(kg.features_of(disease_id))
    if not feature_ids:
        return set()
    evidence_vectors = [encoder.encode(item.text) for item in session.evidence]
    mentioned: set[str] = set()
    for feature_id in feature_ids:
        if feature_id in session.asked_features:
            mentioned.add(feature_id)
            continue
        label_vector = encoder.encode(kg.node(feature_id).label)
        for vec in evidence_vectors:
            if cosine_similarity(label_vector, vec) >= mention_threshold:
                mentioned.add(feature_id)
                break
    return mentioned


def select_critical_feature(
    kg: DiagnosticKG, subcategory_id: str, mentioned: set[str]
) -> str | None:
    """The unmentioned feature that best splits the candidate diseases.

    A feature carried by share p of the candidates scores p(1-p) — maximal
    when it divides them evenly, zero when it says nothing. Ties break
    toward the lower feature id. Returns None when there is nothing left to
    ask or only one candidate remains.
    """
    diseases = kg.diseases_under(subcategory_id)
    if len(diseases) <= 1:
        return None
    carriers: dict[str, int] = {}
    for disease_id in diseases:
        for feature_id in kg.features_of(disease_id):
            carriers[feature_id] = carriers.get(feature_id, 0) + 1
    candidates = [f for f in carriers if f not in mentioned]
    if not candidates:
        return None
    n = len(diseases)

    def score(feature_id: str) -> float:
        p = carriers[feature_id] / n
        return p * (1.0 - p)

    return min(candidates, key=lambda f: (-score(f), f))


class QuestionGenerator(Protocol):
    def generate(self, feature_label: str) -> str: ...


class TemplateQuestionGenerator:
    def generate(self, feature_label: str) -> str:
        return f"Does the patient have {feature_label}?"


class LlmQuestionGenerator:
    """Rephrase the template through an LLM; the label always reaches the prompt."""

    def __init__(self, llm: LlmClient):
        self._llm = llm

    def generate(self, feature_label: str) -> str:
        prompt = (
            "Phrase one short, natural follow-up question a doctor could ask "
            f"to find out whether the patient has: {feature_label}\n"
            "Reply with the question only."
        )
        try:
            return self._llm.complete([{"role": "user", "content": prompt}]).strip()
        except LlmUnavailable as exc:
            raise GeneratorUnavailable(str(exc)) from exc


def formulate_question(feature: KgNode, generator: QuestionGenerator | None = None) -> str:
    """Turn a feature node into a follow-up question.

    Falls back to the deterministic template when the generator is down or
    returns nothing; question formulation must never fail a turn.
    """
    template = TemplateQuestionGenerator().generate(feature.label)
    if generator is None:
        return template
    try:
        question = generator.generate(feature.label)
    except GeneratorUnavailable:
        return template
    return question or template


@dataclass(frozen=True)
class PromptBundle:
    """Deterministic prompt: identical inputs render identical bytes."""

    system: str
    user: str

    def messages(self) -> list[Message]:
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": self.user},
        ]


def _render_evidence(session: ConsultationSession) -> list[str]:
    lines = ["== PATIENT EVIDENCE =="]
    if not session.evidence:
        lines.append("(none)")
    for i, item in enumerate(session.evidence, start=1):
        lines.append(f"{i}. [{item.kind}] {item.text}")
    return lines


def _render_retrieved(retrieved: Sequence[tuple[EhrRecord, float]]) -> list[str]:
    lines = ["== RETRIEVED SIMILAR EHRS =="]
    if not retrieved:
        lines.append("(none)")
    for i, (record, score) in enumerate(retrieved, start=1):
        diagnosis = record.diagnosis if record.diagnosis else "unlabeled"
        lines.append(f"{i}. id={record.id} score={score:.6f} diagnosis={diagnosis}")
        if record.demographics:
            pairs = " ".join(f"{k}={v}" for k, v in sorted(record.demographics.items()))
            lines.append(f"   demographics: {pairs}")
        lines.append(f"   manifestation: {record.manifestation_text}")
    return lines


def _render_triplets(triplets: Sequence[Triplet]) -> list[str]:
    lines = ["== DIAGNOSTIC KNOWLEDGE TRIPLETS =="]
    if not triplets:
        lines.append("(none)")
    for t in triplets:
        lines.append(f"({t.disease}) {t.relation} ({t.feature})")
    return lines


def assemble_prompt(
    session: ConsultationSession,
    retrieved: Sequence[tuple[EhrRecord, float]],
    triplets: Sequence[Triplet],
) -> PromptBundle:
    sections = (
        _render_evidence(session)
        + [""]
        + _render_retrieved(retrieved)
        + [""]
        + _render_triplets(triplets)
        + ["", "== OUTPUT FORMAT ==", OUTPUT_FORMAT_INSTRUCTION]
    )
    return PromptBundle(system=SYSTEM_INSTRUCTION, user="\n".join(sections))


def _recommend(
    session: ConsultationSession,
    kg: DiagnosticKG,
    corpus: Corpus,
    index: VectorIndex,
    encoder: Encoder,
    llm: LlmClient,
    config: PipelineConfig,
    verdict: SufficiencyVerdict,
    question_generator: QuestionGenerator | None,
) -> Recommendation:
    """Shared recommendation path; raises without touching the session."""
    combined = session.combined_text()
    subcategory_id = match_subcategory(kg, combined, encoder)
    triplets = gather_triplets(kg, subcategory_id)
    retrieved = retrieve_similar(corpus, index, combined, encoder, k=config.retrieval_k)
    bundle = assemble_prompt(session, retrieved, triplets)
    raw = llm.complete(bundle.messages())
    parsed = parse_recommendation(raw)

    follow_up = parsed.follow_up_question
    if follow_up is None and not verdict.sufficient:
        # Concluding on thin evidence: still hand the doctor the most
        # discriminative open question, if one exists.
        mentioned = detect_mentioned_features(
            session, kg, kg.diseases_under(subcategory_id), config.mention_threshold, encoder
        )
        feature_id = select_critical_feature(kg, subcategory_id, mentioned)
        if feature_id is not None:
            follow_up = formulate_question(kg.node(feature_id), question_generator)

    return Recommendation(
        diagnosis=parsed.diagnosis,
        treatment=parsed.treatment,
        medication=parsed.medication,
        follow_up_question=follow_up,
        supporting_ehr_ids=tuple(record.id for record, _ in retrieved),
        supporting_triplets=tuple(triplets),
    )


def run_turn(
    session: ConsultationSession,
    kg: DiagnosticKG,
    corpus: Corpus,
    index: VectorIndex,
    encoder: Encoder,
    llm: LlmClient,
    config: PipelineConfig | None = None,
    question_generator: QuestionGenerator | None = None,
) -> TurnResult:
    """One pipeline turn: either a follow-up question or a recommendation."""
    config = config or PipelineConfig()
    if session.status == CONCLUDED:
        raise SessionConcluded(f"session {session.session_id} already concluded")
    verdict = check_sufficiency(
        session, index, encoder, config.sufficiency_threshold, config.retrieval_k
    )
    if not verdict.sufficient and session.question_rounds_used < config.max_rounds:
        combined = session.combined_text()
        subcategory_id = match_subcategory(kg, combined, encoder)
        mentioned = detect_mentioned_features(
            session, kg, kg.diseases_under(subcategory_id), config.mention_threshold, encoder
        )
        feature_id = select_critical_feature(kg, subcategory_id, mentioned)
        if feature_id is not None:
            question = formulate_question(kg.node(feature_id), question_generator)
            session.asked_features.add(feature_id)
            session.question_rounds_used += 1
            session.status = AWAITING_ANSWER
            return FollowUpQuestion(question=question, feature_id=feature_id, verdict=verdict)
    recommendation = _recommend(
        session, kg, corpus, index, encoder, llm, config, verdict, question_generator
    )
    session.status = CONCLUDED
    return recommendation


def one_shot(
    text: str,
    kg: DiagnosticKG,
    corpus: Corpus,
    index: VectorIndex,
    encoder: Encoder,
    llm: LlmClient,
    config: PipelineConfig | None = None,
    question_generator: QuestionGenerator | None = None,
) -> Recommendation:
    """Stateless query: a transient session forced straight to a recommendation."""
    config = config or PipelineConfig()
    session = ConsultationSession()
    session.add_evidence("typed-query", text)
    verdict = check_sufficiency(
        session, index, encoder, config.sufficiency_threshold, config.retrieval_k
    )
    return _recommend(
        session, kg, corpus, index, encoder, llm, config, verdict, question_generator
    )
