import json
import random

import pytest

from dxcopilot.embedding import OfflineEncoder, cosine_similarity
from dxcopilot.errors import (
    EmptySession,
    GeneratorUnavailable,
    LlmUnavailable,
    ParseFailure,
    SessionConcluded,
)
from dxcopilot.kg import node_id
from dxcopilot.llm import FailingLlm, StaticLlm
from dxcopilot.orchestrator import (
    AWAITING_ANSWER,
    CONCLUDED,
    ConsultationSession,
    FollowUpQuestion,
    LlmQuestionGenerator,
    PipelineConfig,
    Recommendation,
    TemplateQuestionGenerator,
    assemble_prompt,
    check_sufficiency,
    detect_mentioned_features,
    formulate_question,
    one_shot,
    run_turn,
    select_critical_feature,
)

from helpers import critical_feature_oracle, kg_from_incidence


def make_session(*texts, kind="utterance"):
    session = ConsultationSession()
    for text in texts:
        session.add_evidence(kind, text)
    return session


STUB_REPLY = '```json\n{"diagnosis": "Lumbar canal stenosis", "treatment": "physiotherapy"}\n```'


class TestSession:
    def test_timestamps_are_monotonic(self):
        session = make_session("one", "two", "three")
        stamps = [item.timestamp for item in session.evidence]
        assert stamps == sorted(stamps) and len(set(stamps)) == 3

    def test_empty_evidence_text_rejected(self):
        session = ConsultationSession()
        with pytest.raises(ValueError):
            session.add_evidence("utterance", "   ")

    def test_unknown_kind_rejected(self):
        session = ConsultationSession()
        with pytest.raises(ValueError):
            session.add_evidence("telegram", "hello")

    def test_session_ids_are_long_and_unique(self):
        ids = {ConsultationSession().session_id for _ in range(64)}
        assert len(ids) == 64
        assert all(len(sid) == 32 for sid in ids)  # 128 bits hex


class TestCheckSufficiency:
    def test_above_threshold(self, lumbar_corpus, lumbar_index, encoder):
        text = lumbar_corpus.record("e5").manifestation_text
        verdict = check_sufficiency(
            make_session(text), lumbar_index, encoder, threshold=0.8
        )
        assert verdict.sufficient and verdict.max_score >= 0.8

    def test_below_threshold(self, lumbar_corpus, lumbar_index, encoder):
        verdict = check_sufficiency(
            make_session("completely unrelated gibberish zzz"),
            lumbar_index,
            encoder,
            threshold=0.8,
        )
        assert not verdict.sufficient

    def test_exact_threshold_counts_as_sufficient(self, lumbar_corpus, lumbar_index, encoder):
        text = lumbar_corpus.record("e5").manifestation_text
        verdict = check_sufficiency(
            make_session(text), lumbar_index, encoder, threshold=1.0
        )
        assert verdict.max_score == pytest.approx(1.0)
        assert verdict.sufficient  # >= rule at the boundary

    def test_empty_session_rejected(self, lumbar_corpus, lumbar_index, encoder):
        with pytest.raises(EmptySession):
            check_sufficiency(ConsultationSession(), lumbar_index, encoder, 0.8)


class TestDetectMentionedFeatures:
    def test_verbatim_mention(self, lumbar_kg, encoder):
        sub = node_id("subcategory", "lumbar degenerative conditions")
        diseases = lumbar_kg.diseases_under(sub)
        feature = node_id("feature", "positive straight leg raise")
        session = make_session("positive straight leg raise")
        mentioned = detect_mentioned_features(session, lumbar_kg, diseases, 0.6, encoder)
        assert feature in mentioned

    def test_unreachable_threshold_gives_empty_set(self, lumbar_kg, encoder):
        sub = node_id("subcategory", "lumbar degenerative conditions")
        diseases = lumbar_kg.diseases_under(sub)
        session = make_session("hello there")
        assert detect_mentioned_features(session, lumbar_kg, diseases, 1.01, encoder) == set()

    def test_asked_features_always_count(self, lumbar_kg, encoder):
        sub = node_id("subcategory", "lumbar degenerative conditions")
        diseases = lumbar_kg.diseases_under(sub)
        feature = node_id("feature", "tingling in the foot")
        session = make_session("hello there")
        session.asked_features.add(feature)
        mentioned = detect_mentioned_features(session, lumbar_kg, diseases, 1.01, encoder)
        assert mentioned == {feature}

    def test_matches_pairwise_oracle(self, lumbar_kg, encoder):
        sub = node_id("subcategory", "lumbar degenerative conditions")
        diseases = lumbar_kg.diseases_under(sub)
        session = make_session(
            "numbness in the calf and toes",
            "pain is worse when sitting",
            "no fever at all",
        )
        tau = 0.35
        got = detect_mentioned_features(session, lumbar_kg, diseases, tau, encoder)
        features = set()
        for d in diseases:
            features.update(lumbar_kg.features_of(d))
        expected = set()
        for f in features:
            label_vec = encoder.encode(lumbar_kg.node(f).label)
            best = max(
                cosine_similarity(label_vec, encoder.encode(item.text))
                for item in session.evidence
            )
            if best >= tau:
                expected.add(f)
        assert got == expected
        assert expected  # fixture should actually mention something


class TestSelectCriticalFeature:
    def test_even_split_beats_universal(self):
        kg, _, (f1, f2) = kg_from_incidence([[1, 1], [0, 1]])
        assert select_critical_feature(kg, node_id("subcategory", "sub"), set()) == f1

    def test_single_disease_returns_nothing(self):
        kg, _, _ = kg_from_incidence([[1, 1]])
        assert select_critical_feature(kg, node_id("subcategory", "sub"), set()) is None

    def test_all_mentioned_returns_nothing(self):
        kg, _, (f1, f2) = kg_from_incidence([[1, 1], [0, 1]])
        assert select_critical_feature(kg, node_id("subcategory", "sub"), {f1, f2}) is None

    def test_tie_breaks_by_feature_id(self):
        kg, _, (f1, f2, f3) = kg_from_incidence([[1, 0, 1], [0, 1, 0]])
        # f00 and f01 both split 1/2 -> same score; lower id wins
        assert select_critical_feature(kg, node_id("subcategory", "sub"), set()) == f1

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_scorer(self, seed):
        rng = random.Random(seed)
        n_d = rng.randint(1, 6)
        n_f = rng.randint(1, 12)
        incidence = [[rng.randint(0, 1) for _ in range(n_f)] for _ in range(n_d)]
        mentioned_idx = {j for j in range(n_f) if rng.random() < 0.3}
        kg, _, feature_ids = kg_from_incidence(incidence)
        mentioned = {feature_ids[j] for j in mentioned_idx}
        got = select_critical_feature(kg, node_id("subcategory", "sub"), mentioned)
        expected_idx = critical_feature_oracle(incidence, mentioned_idx)
        expected = feature_ids[expected_idx] if expected_idx is not None else None
        assert got == expected


class TestFormulateQuestion:
    def test_template(self, lumbar_kg):
        feature = lumbar_kg.node(node_id("feature", "pain worse when standing or walking down hill"))
        assert (
            formulate_question(feature)
            == "Does the patient have pain worse when standing or walking down hill?"
        )

    def test_llm_generator_receives_label(self, lumbar_kg):
        llm = StaticLlm("Is the pain worse when standing or walking down hill?")
        feature = lumbar_kg.node(node_id("feature", "pain worse when standing or walking down hill"))
        question = formulate_question(feature, LlmQuestionGenerator(llm))
        assert question == "Is the pain worse when standing or walking down hill?"
        prompt_text = llm.calls[0][0]["content"]
        assert "pain worse when standing or walking down hill" in prompt_text

    def test_unavailable_generator_falls_back_to_template(self, lumbar_kg):
        feature = lumbar_kg.node(node_id("feature", "tingling in the foot"))
        question = formulate_question(feature, LlmQuestionGenerator(FailingLlm()))
        assert question == "Does the patient have tingling in the foot?"

    def test_generator_errors_propagate_when_called_directly(self):
        with pytest.raises(GeneratorUnavailable):
            LlmQuestionGenerator(FailingLlm()).generate("anything")


class TestAssemblePrompt:
    def test_structure_is_stable_with_empty_triplets(self, lumbar_corpus):
        session = make_session("some text")
        retrieved = [(lumbar_corpus.record("e1"), 0.875)]
        bundle = assemble_prompt(session, retrieved, [])
        assert "== PATIENT EVIDENCE ==" in bundle.user
        assert "== RETRIEVED SIMILAR EHRS ==" in bundle.user
        assert "== DIAGNOSTIC KNOWLEDGE TRIPLETS ==\n(none)" in bundle.user
        assert "== OUTPUT FORMAT ==" in bundle.user
        order = [
            bundle.user.index("== PATIENT EVIDENCE =="),
            bundle.user.index("== RETRIEVED SIMILAR EHRS =="),
            bundle.user.index("== DIAGNOSTIC KNOWLEDGE TRIPLETS =="),
            bundle.user.index("== OUTPUT FORMAT =="),
        ]
        assert order == sorted(order)

    def test_patient_text_appears_verbatim(self, lumbar_corpus):
        q = (
            "Provide diagnosis suggestions for the following patient: Age: 47. "
            "Functional status: Difficulty walking. Description: Pain from right "
            "lower back radiates down to buttock and right posterior lower limb."
        )
        bundle = assemble_prompt(make_session(q, kind="typed-query"), [], [])
        assert "Pain from right lower back radiates" in bundle.user

    def test_byte_identical_for_identical_inputs(self, lumbar_corpus, lumbar_kg):
        from dxcopilot.kg import gather_triplets

        session_a = make_session("leg pain", "worse at night")
        session_b = make_session("leg pain", "worse at night")
        retrieved = [(lumbar_corpus.record("e3"), 0.75), (lumbar_corpus.record("e4"), 0.5)]
        triplets = gather_triplets(lumbar_kg, node_id("subcategory", "lumbar degenerative conditions"))
        a = assemble_prompt(session_a, retrieved, triplets)
        b = assemble_prompt(session_b, retrieved, triplets)
        assert a.system == b.system and a.user == b.user
        assert a.messages() == b.messages()


class TestRunTurn:
    def assets(self, lumbar_kg, lumbar_corpus, lumbar_index, encoder, llm=None, **cfg):
        config = PipelineConfig(**cfg) if cfg else PipelineConfig()
        return dict(
            kg=lumbar_kg,
            corpus=lumbar_corpus,
            index=lumbar_index,
            encoder=encoder,
            llm=llm or StaticLlm(STUB_REPLY),
            config=config,
        )

    def test_sparse_evidence_yields_followup(self, lumbar_kg, lumbar_corpus, lumbar_index, encoder):
        session = make_session("patient reports back pain")
        result = run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        assert isinstance(result, FollowUpQuestion)
        assert session.status == AWAITING_ANSWER
        assert session.question_rounds_used == 1
        assert result.feature_id in session.asked_features
        assert not result.verdict.sufficient

    def test_rich_evidence_yields_recommendation(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session(lumbar_corpus.record("e1").manifestation_text)
        result = run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        assert isinstance(result, Recommendation)
        assert result.diagnosis == "Lumbar canal stenosis"
        assert session.status == CONCLUDED
        assert list(result.supporting_ehr_ids)[0] == "e1"
        assert len(result.supporting_ehr_ids) <= 3

    def test_round_cap_forces_recommendation(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session("patient reports back pain")
        session.question_rounds_used = 5
        result = run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        assert isinstance(result, Recommendation)
        assert session.status == CONCLUDED

    def test_insufficient_conclusion_still_carries_followup(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session("patient reports back pain")
        session.question_rounds_used = 5
        result = run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        assert result.follow_up_question  # synthesized from the critical feature

    def test_llm_proposed_followup_wins(self, lumbar_kg, lumbar_corpus, lumbar_index, encoder):
        reply = json.dumps(
            {"diagnosis": "Sciatica", "follow_up_question": "Does coughing make it worse?"}
        )
        session = make_session(lumbar_corpus.record("e5").manifestation_text)
        result = run_turn(
            session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder, llm=StaticLlm(reply))
        )
        assert result.follow_up_question == "Does coughing make it worse?"

    def test_llm_failure_leaves_session_unchanged(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session(lumbar_corpus.record("e1").manifestation_text)
        before = (session.status, session.question_rounds_used, set(session.asked_features))
        with pytest.raises(LlmUnavailable):
            run_turn(
                session,
                **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder, llm=FailingLlm()),
            )
        assert (session.status, session.question_rounds_used, set(session.asked_features)) == before

    def test_parse_failure_preserves_raw_text(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session(lumbar_corpus.record("e1").manifestation_text)
        with pytest.raises(ParseFailure) as err:
            run_turn(
                session,
                **self.assets(
                    lumbar_kg, lumbar_corpus, lumbar_index, encoder, llm=StaticLlm("just prose")
                ),
            )
        assert err.value.raw_text == "just prose"
        assert session.status != CONCLUDED

    def test_concluded_session_rejected(self, lumbar_kg, lumbar_corpus, lumbar_index, encoder):
        session = make_session(lumbar_corpus.record("e1").manifestation_text)
        run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        with pytest.raises(SessionConcluded):
            run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))

    def test_followup_only_when_insufficient(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        # exact record text -> sufficient -> never a follow-up
        session = make_session(lumbar_corpus.record("e7").manifestation_text)
        result = run_turn(session, **self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder))
        assert isinstance(result, Recommendation)

    def test_answer_loop_reaches_conclusion(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        session = make_session("patient reports back pain")
        assets = self.assets(lumbar_kg, lumbar_corpus, lumbar_index, encoder)
        turns = 0
        result = None
        while turns <= PipelineConfig().max_rounds + 1:
            result = run_turn(session, **assets)
            turns += 1
            if isinstance(result, Recommendation):
                break
            session.add_evidence("answer", "no, nothing like that")
        assert isinstance(result, Recommendation)
        assert turns <= PipelineConfig().max_rounds + 1


class TestOneShot:
    def test_forced_recommendation_path(self, lumbar_kg, lumbar_corpus, lumbar_index, encoder):
        rec = one_shot(
            "patient reports back pain",  # sparse: run_turn would ask a question
            lumbar_kg,
            lumbar_corpus,
            lumbar_index,
            encoder,
            StaticLlm(STUB_REPLY),
        )
        assert isinstance(rec, Recommendation)

    def test_supporting_ids_match_retrieval_rank(
        self, lumbar_kg, lumbar_corpus, lumbar_index, encoder
    ):
        from dxcopilot.corpus import retrieve_similar

        text = "stiffness in the lower back in the morning"
        rec = one_shot(text, lumbar_kg, lumbar_corpus, lumbar_index, encoder, StaticLlm(STUB_REPLY))
        expected = [r.id for r, _ in retrieve_similar(lumbar_corpus, lumbar_index, text, encoder)]
        assert list(rec.supporting_ehr_ids) == expected
