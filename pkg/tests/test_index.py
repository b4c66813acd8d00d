import random

import pytest
from hypothesis import given, settings, strategies as st

from dxcopilot.embedding import EmbeddingVector, OfflineEncoder
from dxcopilot.errors import DimensionMismatch, DuplicateId, EncoderMismatch, ZeroVector
from dxcopilot.index import index_build, top_k

from helpers import brute_force_ranking, synthetic_flat_corpus


def vec(*values):
    return EmbeddingVector(values=tuple(float(v) for v in values))


def test_empty_index_returns_no_hits():
    index = index_build([])
    assert top_k(index, vec(1, 0), 3) == []


def test_duplicate_id_rejected():
    with pytest.raises(DuplicateId):
        index_build([("a", vec(1, 0)), ("a", vec(0, 1))])


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        index_build([("a", vec(1, 0)), ("b", vec(0, 1, 0))])


def test_zero_vector_rejected_at_build():
    with pytest.raises(ZeroVector):
        index_build([("a", vec(0, 0))])


def test_insertion_order_preserved():
    index = index_build([("z", vec(1, 0)), ("a", vec(0, 1))])
    assert index.ids == ("z", "a")


def test_k_clamped_to_corpus_size():
    index = index_build([("a", vec(1, 0)), ("b", vec(0, 1))])
    assert len(top_k(index, vec(1, 0), 3)) == 2


def test_k_must_be_positive():
    index = index_build([("a", vec(1, 0))])
    with pytest.raises(ValueError):
        top_k(index, vec(1, 0), 0)


def test_query_dimension_checked():
    index = index_build([("a", vec(1, 0))])
    with pytest.raises(DimensionMismatch):
        top_k(index, vec(1, 0, 0), 1)


def test_encoder_mismatch_rejected():
    a = EmbeddingVector(values=(1.0, 0.0), encoder="enc-one")
    b = EmbeddingVector(values=(0.0, 1.0), encoder="enc-two")
    index = index_build([("a", a)])
    with pytest.raises(EncoderMismatch):
        top_k(index, b, 1)
    with pytest.raises(EncoderMismatch):
        index_build([("a", a), ("b", b)])


def test_exact_match_scores_one():
    encoder = OfflineEncoder()
    texts = {"a": "knee pain at night", "b": "productive cough with fever"}
    index = index_build([(rid, encoder.encode(t)) for rid, t in texts.items()])
    hits = top_k(index, encoder.encode(texts["b"]), 1)
    assert hits[0].record_id == "b"
    assert hits[0].score == pytest.approx(1.0, abs=1e-6)


def test_tie_breaks_by_ascending_id():
    index = index_build([("b", vec(1, 0)), ("a", vec(1, 0)), ("c", vec(0, 1))])
    hits = top_k(index, vec(2, 0), 3)
    assert [h.record_id for h in hits] == ["a", "b", "c"]


def test_fifty_records_match_brute_force():
    encoder = OfflineEncoder(dimension=64)
    rows = synthetic_flat_corpus(random.Random(7), 50)
    vectors = [(rid, encoder.encode(text)) for rid, text in rows]
    index = index_build(vectors)
    assert len(index) == 50
    query = encoder.encode("stabbing chest pain at night")
    expected = brute_force_ranking([(rid, v.values) for rid, v in vectors], query.values)
    assert [h.record_id for h in top_k(index, query, 5)] == expected[:5]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 120), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_topk_is_prefix_of_brute_force_ranking(n_records, k, seed):
    encoder = OfflineEncoder(dimension=32)
    rng = random.Random(seed)
    rows = synthetic_flat_corpus(rng, n_records)
    vectors = [(rid, encoder.encode(text)) for rid, text in rows]
    index = index_build(vectors)
    query = encoder.encode(" ".join(["evening", "cramping", "hip"][: rng.randint(1, 3)]))
    hits = top_k(index, query, k)
    full = brute_force_ranking([(rid, v.values) for rid, v in vectors], query.values)
    assert [h.record_id for h in hits] == full[: min(k, n_records)]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_growing_k_never_reorders_earlier_hits(n_records, k, seed):
    encoder = OfflineEncoder(dimension=32)
    rows = synthetic_flat_corpus(random.Random(seed), n_records)
    index = index_build([(rid, encoder.encode(text)) for rid, text in rows])
    query = encoder.encode("throbbing ankle pain on exertion")
    small = top_k(index, query, k)
    large = top_k(index, query, k + 5)
    assert large[: len(small)] == small
