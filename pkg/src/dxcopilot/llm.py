"""Backbone LLM contract, clients, test doubles, and output parsing.

Clients speak a minimal chat-completion shape: ``complete(messages)`` takes
``[{"role": ..., "content": ...}, ...]`` and returns the reply text. Besides
the HTTP client there are three offline implementations:

* ``StaticLlm`` — fixed reply, for plumbing tests;
* ``OracleStubLlm`` — replies with the diagnosis of the top-retrieved EHR it
  finds in the prompt, which makes end-to-end metrics independently
  recomputable;
* ``RecordReplayLlm`` — persists real replies keyed by a hash of the prompt
  and replays them later, so golden-path tests are deterministic and
  network-free.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .errors import LlmUnavailable, ParseFailure

Message = dict[str, str]

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)
_TOP_HIT_RE = re.compile(r"^1\. id=\S+ score=\S+ diagnosis=(.*)$", re.MULTILINE)


class LlmClient(Protocol):
    def complete(self, messages: Sequence[Message]) -> str: ...


@dataclass
class LlmConfig:
    base_url: str
    model: str
    api_token: str | None = None
    timeout_seconds: float = 60.0
    max_retries: int = 2


class HttpLlmClient:
    """POST {"model", "messages"} to a chat-completion endpoint, read {"content"}."""

    def __init__(self, config: LlmConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def complete(self, messages: Sequence[Message]) -> str:
        payload = {"model": self.config.model, "messages": list(messages)}
        headers = {}
        if self.config.api_token:
            headers["Authorization"] = f"Bearer {self.config.api_token}"
        last_error: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                response = self._session.post(
                    self.config.base_url,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout_seconds,
                )
                response.raise_for_status()
                content = response.json()["content"]
                if not isinstance(content, str):
                    raise ValueError("response 'content' is not a string")
                return content
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        raise LlmUnavailable(f"chat completion failed: {last_error}")


class StaticLlm:
    def __init__(self, content: str):
        self.content = content
        self.calls: list[list[Message]] = []

    def complete(self, messages: Sequence[Message]) -> str:
        self.calls.append(list(messages))
        return self.content


class FailingLlm:
    """Always unavailable; for error-path tests."""

    def complete(self, messages: Sequence[Message]) -> str:
        raise LlmUnavailable("llm deliberately offline")


class OracleStubLlm:
    """Answer with the rank-1 retrieved EHR's diagnosis found in the prompt."""

    def complete(self, messages: Sequence[Message]) -> str:
        text = "\n".join(m.get("content", "") for m in messages)
        match = _TOP_HIT_RE.search(text)
        diagnosis = match.group(1).strip() if match else "undetermined"
        if not diagnosis:
            diagnosis = "undetermined"
        return "```json\n" + json.dumps({"diagnosis": diagnosis}) + "\n```"


def prompt_key(messages: Sequence[Message]) -> str:
    """Stable fingerprint of a prompt: sha256 of its canonical JSON."""
    canonical = json.dumps(list(messages), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RecordReplayLlm:
    """Fixture-backed client.

    In record mode (``backing`` set) unseen prompts go to the backing client
    and the reply is written to ``<key>.json`` in the fixture directory. In
    replay mode an unseen prompt raises LlmUnavailable, keeping tests honest
    about what they actually recorded.
    """

    def __init__(self, fixture_dir: str | Path, backing: LlmClient | None = None):
        self.fixture_dir = Path(fixture_dir)
        self.backing = backing
        self.fixture_dir.mkdir(parents=True, exist_ok=True)

    def complete(self, messages: Sequence[Message]) -> str:
        key = prompt_key(messages)
        fixture = self.fixture_dir / f"{key}.json"
        if fixture.exists():
            return json.loads(fixture.read_text(encoding="utf-8"))["content"]
        if self.backing is None:
            raise LlmUnavailable(f"no recorded fixture for prompt {key}")
        content = self.backing.complete(messages)
        fixture.write_text(
            json.dumps({"prompt_sha256": key, "content": content}, ensure_ascii=False, indent=2),
            encoding="utf-8",
        )
        return content


@dataclass(frozen=True)
class ParsedRecommendation:
    diagnosis: str
    treatment: str | None = None
    medication: str | None = None
    follow_up_question: str | None = None


def _clean_field(obj: dict, key: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        value = str(value)
    value = value.strip()
    return value or None


def parse_recommendation(raw_text: str) -> ParsedRecommendation:
    """Extract the structured recommendation from model output.

    The prompt asks for a fenced JSON object; surrounding prose is tolerated,
    anything else fails cleanly with the raw text preserved.
    """
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw_text)]
    candidates.append(raw_text.strip())
    obj = None
    for candidate in candidates:
        try:
            parsed = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, dict):
            obj = parsed
            break
    if obj is None:
        raise ParseFailure("no JSON object found in LLM output", raw_text)
    diagnosis = _clean_field(obj, "diagnosis")
    if not diagnosis:
        raise ParseFailure("LLM output lacks a diagnosis", raw_text)
    return ParsedRecommendation(
        diagnosis=diagnosis,
        treatment=_clean_field(obj, "treatment"),
        medication=_clean_field(obj, "medication"),
        follow_up_question=_clean_field(obj, "follow_up_question"),
    )
