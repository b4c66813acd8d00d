"""Speech-to-text contract.

Real transcription is an external service; the engine only ever sees the
contract. The stub maps fixture names to canned transcripts so voice flows
are testable without audio or network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol

import requests

from .errors import TranscriptionFailure

FIXTURE_PREFIX = "fixture:"


class TranscriptionClient(Protocol):
    def transcribe(self, audio_ref: str) -> str: ...


class StubTranscriber:
    """Maps ``fixture:<name>`` (or bare names) to fixed transcripts."""

    def __init__(self, fixtures: Mapping[str, str]):
        self._fixtures = dict(fixtures)

    def transcribe(self, audio_ref: str) -> str:
        name = audio_ref[len(FIXTURE_PREFIX):] if audio_ref.startswith(FIXTURE_PREFIX) else audio_ref
        try:
            return self._fixtures[name]
        except KeyError:
            raise TranscriptionFailure(f"no transcript fixture named {name!r}") from None


@dataclass
class TranscriberConfig:
    base_url: str
    api_token: str | None = None
    timeout_seconds: float = 60.0


class HttpTranscriber:
    """POST {"audio_ref": ...} to the transcription service, read {"text": ...}."""

    def __init__(self, config: TranscriberConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def transcribe(self, audio_ref: str) -> str:
        headers = {}
        if self.config.api_token:
            headers["Authorization"] = f"Bearer {self.config.api_token}"
        try:
            response = self._session.post(
                self.config.base_url,
                json={"audio_ref": audio_ref},
                headers=headers,
                timeout=self.config.timeout_seconds,
            )
            response.raise_for_status()
            text = response.json()["text"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise TranscriptionFailure(f"transcription service failed: {exc}") from exc
        if not isinstance(text, str) or not text.strip():
            raise TranscriptionFailure("transcription service returned no text")
        return text
