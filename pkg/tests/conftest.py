"""Shared fixtures.

The whole suite runs with outbound TCP blocked: every component under test
must work offline with the deterministic encoder and stub clients. AF_UNIX
stays allowed (event loops use socketpairs internally).
"""

from __future__ import annotations

import socket
from pathlib import Path

import pytest

from dxcopilot.corpus import build_index, embed_corpus, ingest
from dxcopilot.embedding import OfflineEncoder
from dxcopilot.kg import KgConfig, build_kg

FIXTURES = Path(__file__).parent / "fixtures"

_real_connect = socket.socket.connect


def _guarded_connect(self, address):
    if self.family in (socket.AF_INET, socket.AF_INET6):
        raise RuntimeError(f"test suite attempted network access: {address!r}")
    return _real_connect(self, address)


@pytest.fixture(autouse=True, scope="session")
def no_network():
    socket.socket.connect = _guarded_connect
    yield
    socket.socket.connect = _real_connect


@pytest.fixture(scope="session")
def encoder():
    return OfflineEncoder()


@pytest.fixture(scope="session")
def lumbar_corpus_path() -> Path:
    return FIXTURES / "lumbar_corpus.jsonl"


@pytest.fixture(scope="session")
def lumbar_corpus(lumbar_corpus_path, encoder):
    return embed_corpus(ingest(lumbar_corpus_path), encoder)


@pytest.fixture(scope="session")
def lumbar_index(lumbar_corpus):
    return build_index(lumbar_corpus)


@pytest.fixture(scope="session")
def lumbar_kg(lumbar_corpus):
    return build_kg(lumbar_corpus, KgConfig(mode="labels"))
