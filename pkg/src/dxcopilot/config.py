"""Configuration: JSON file plus environment overrides, and asset wiring.

A config file names the knowledge assets (corpus, graph) and chooses
implementations for the three pluggable clients (encoder, backbone LLM,
transcriber). Secrets and endpoints can be overridden through
``DXCOPILOT_*`` environment variables so config files stay committable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, build_index, embed_corpus, ingest
from .embedding import (
    DEFAULT_OFFLINE_DIMENSION,
    Encoder,
    OfflineEncoder,
    RemoteEncoderConfig,
    RemoteHttpEncoder,
)
from .index import VectorIndex
from .kg.io import load_kg
from .kg.model import DiagnosticKG
from .llm import HttpLlmClient, LlmClient, LlmConfig, OracleStubLlm, RecordReplayLlm, StaticLlm
from .orchestrator import (
    LlmQuestionGenerator,
    PipelineConfig,
    QuestionGenerator,
    TemplateQuestionGenerator,
)
from .transcription import HttpTranscriber, StubTranscriber, TranscriberConfig, TranscriptionClient

ENV_PREFIX = "DXCOPILOT_"


def _env(name: str, default: str | None = None) -> str | None:
    return os.environ.get(ENV_PREFIX + name, default)


@dataclass
class EncoderSettings:
    kind: str = "offline"  # "offline" | "remote"
    dimension: int = DEFAULT_OFFLINE_DIMENSION
    base_url: str = ""
    model: str = ""
    api_token: str | None = None
    timeout_seconds: float = 30.0
    max_retries: int = 2


@dataclass
class LlmSettings:
    kind: str = "oracle-stub"  # "oracle-stub" | "static" | "replay" | "http"
    base_url: str = ""
    model: str = ""
    api_token: str | None = None
    timeout_seconds: float = 60.0
    max_retries: int = 2
    fixture_dir: str = ""
    static_content: str = ""
    question_generator: str = "template"  # "template" | "llm"


@dataclass
class TranscriberSettings:
    kind: str = "stub"  # "stub" | "http"
    base_url: str = ""
    api_token: str | None = None
    fixtures: dict[str, str] = field(default_factory=dict)


@dataclass
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8000
    bearer_token: str | None = None
    session_log_path: str | None = None


@dataclass
class AppConfig:
    corpus_path: str = ""
    kg_path: str = ""
    encoder: EncoderSettings = field(default_factory=EncoderSettings)
    llm: LlmSettings = field(default_factory=LlmSettings)
    transcriber: TranscriberSettings = field(default_factory=TranscriberSettings)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    service: ServiceSettings = field(default_factory=ServiceSettings)


def load_config(path: str | Path) -> AppConfig:
    """Read a JSON config file and apply environment overrides."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    config = AppConfig(
        corpus_path=raw.get("corpus_path", ""),
        kg_path=raw.get("kg_path", ""),
        encoder=EncoderSettings(**raw.get("encoder", {})),
        llm=LlmSettings(**raw.get("llm", {})),
        transcriber=TranscriberSettings(**raw.get("transcriber", {})),
        pipeline=PipelineConfig(**raw.get("pipeline", {})),
        service=ServiceSettings(**raw.get("service", {})),
    )
    return apply_env_overrides(config)


def apply_env_overrides(config: AppConfig) -> AppConfig:
    config.encoder.base_url = _env("ENCODER_BASE_URL", config.encoder.base_url) or ""
    config.encoder.api_token = _env("ENCODER_API_TOKEN", config.encoder.api_token)
    config.llm.base_url = _env("LLM_BASE_URL", config.llm.base_url) or ""
    config.llm.api_token = _env("LLM_API_TOKEN", config.llm.api_token)
    config.transcriber.base_url = _env("TRANSCRIBER_BASE_URL", config.transcriber.base_url) or ""
    config.transcriber.api_token = _env("TRANSCRIBER_API_TOKEN", config.transcriber.api_token)
    config.service.bearer_token = _env("SERVICE_BEARER_TOKEN", config.service.bearer_token)
    port = _env("SERVICE_PORT")
    if port:
        config.service.port = int(port)
    return config


def build_encoder(settings: EncoderSettings) -> Encoder:
    if settings.kind == "offline":
        return OfflineEncoder(dimension=settings.dimension)
    if settings.kind == "remote":
        return RemoteHttpEncoder(
            RemoteEncoderConfig(
                base_url=settings.base_url,
                model=settings.model,
                api_token=settings.api_token,
                timeout_seconds=settings.timeout_seconds,
                max_retries=settings.max_retries,
            ),
            dimension=settings.dimension,
        )
    raise ValueError(f"unknown encoder kind {settings.kind!r}")


def build_llm(settings: LlmSettings) -> LlmClient:
    if settings.kind == "oracle-stub":
        return OracleStubLlm()
    if settings.kind == "static":
        return StaticLlm(settings.static_content)
    if settings.kind == "replay":
        return RecordReplayLlm(settings.fixture_dir)
    if settings.kind == "http":
        return HttpLlmClient(
            LlmConfig(
                base_url=settings.base_url,
                model=settings.model,
                api_token=settings.api_token,
                timeout_seconds=settings.timeout_seconds,
                max_retries=settings.max_retries,
            )
        )
    raise ValueError(f"unknown llm kind {settings.kind!r}")


def build_question_generator(settings: LlmSettings, llm: LlmClient) -> QuestionGenerator:
    if settings.question_generator == "llm":
        return LlmQuestionGenerator(llm)
    return TemplateQuestionGenerator()


def build_transcriber(settings: TranscriberSettings) -> TranscriptionClient:
    if settings.kind == "stub":
        return StubTranscriber(settings.fixtures)
    if settings.kind == "http":
        return HttpTranscriber(
            TranscriberConfig(base_url=settings.base_url, api_token=settings.api_token)
        )
    raise ValueError(f"unknown transcriber kind {settings.kind!r}")


@dataclass
class ServiceAssets:
    """Everything a running service shares read-only across sessions."""

    kg: DiagnosticKG
    corpus: Corpus
    index: VectorIndex
    encoder: Encoder
    llm: LlmClient
    transcriber: TranscriptionClient
    question_generator: QuestionGenerator
    pipeline: PipelineConfig


def load_assets(config: AppConfig) -> ServiceAssets:
    """Load corpus + graph from disk and wire the configured clients."""
    encoder = build_encoder(config.encoder)
    corpus = embed_corpus(ingest(config.corpus_path), encoder)
    index = build_index(corpus)
    kg = load_kg(config.kg_path)
    llm = build_llm(config.llm)
    return ServiceAssets(
        kg=kg,
        corpus=corpus,
        index=index,
        encoder=encoder,
        llm=llm,
        transcriber=build_transcriber(config.transcriber),
        question_generator=build_question_generator(config.llm, llm),
        pipeline=config.pipeline,
    )
