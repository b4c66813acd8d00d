"""HTTP service: sessions, the three input modalities, and recommendations.

Concurrency model: each session has one mutation lock, and the committed
session state is an immutable snapshot swapped in atomically after a turn
completes. Readers never lock — they see either the pre-turn or the
post-turn snapshot, never anything in between. A failed turn (LLM down,
unparseable output) commits nothing.

All errors use one JSON shape: ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import ServiceAssets, ServiceSettings
from .corpus import parse_record_json
from .errors import (
    DxCopilotError,
    LlmUnavailable,
    MalformedRecord,
    ParseFailure,
    TranscriptionFailure,
)
from .orchestrator import (
    CONCLUDED,
    ConsultationSession,
    FollowUpQuestion,
    Recommendation,
    one_shot,
    run_turn,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


@dataclass(frozen=True)
class SessionState:
    """Committed snapshot; replaced wholesale, never mutated."""

    session: ConsultationSession
    pending_question: str | None = None
    latest_recommendation: Recommendation | None = None


@dataclass
class SessionEntry:
    state: SessionState
    created_order: int
    lock: threading.Lock = field(default_factory=threading.Lock)


def recommendation_to_dict(rec: Recommendation) -> dict:
    return {
        "diagnosis": rec.diagnosis,
        "treatment": rec.treatment,
        "medication": rec.medication,
        "follow_up_question": rec.follow_up_question,
        "supporting_ehr_ids": list(rec.supporting_ehr_ids),
        "supporting_triplets": [
            {"disease": t.disease, "relation": t.relation, "feature": t.feature}
            for t in rec.supporting_triplets
        ],
    }


def session_view(state: SessionState) -> dict:
    session = state.session
    return {
        "session_id": session.session_id,
        "status": session.status,
        "transcript": [
            {"kind": item.kind, "text": item.text, "timestamp": item.timestamp}
            for item in session.evidence
        ],
        "pending_question": state.pending_question,
        "latest_recommendation": (
            recommendation_to_dict(state.latest_recommendation)
            if state.latest_recommendation
            else None
        ),
    }


class SessionStore:
    """In-memory sessions with an optional JSONL append log for recovery."""

    def __init__(self, log_path: str | Path | None = None):
        self._entries: dict[str, SessionEntry] = {}
        self._store_lock = threading.Lock()
        self._log_lock = threading.Lock()
        self._counter = 0
        self._log_path = Path(log_path) if log_path else None
        if self._log_path and self._log_path.exists():
            self._recover()

    def create(self) -> SessionEntry:
        session = ConsultationSession()
        state = SessionState(session=session)
        with self._store_lock:
            self._counter += 1
            entry = SessionEntry(state=state, created_order=self._counter)
            self._entries[session.session_id] = entry
        self._append_log(state)
        return entry

    def get(self, session_id: str) -> SessionEntry:
        try:
            return self._entries[session_id]
        except KeyError:
            raise ApiError(404, "not_found", f"no session {session_id!r}") from None

    def list_newest_first(self) -> list[SessionEntry]:
        return sorted(self._entries.values(), key=lambda e: -e.created_order)

    def commit(self, entry: SessionEntry, state: SessionState) -> None:
        entry.state = state
        self._append_log(state)

    def _append_log(self, state: SessionState) -> None:
        if self._log_path is None:
            return
        record = {
            "event": "state",
            "view": session_view(state),
            "asked_features": sorted(state.session.asked_features),
            "question_rounds_used": state.session.question_rounds_used,
        }
        with self._log_lock:
            with self._log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    def _recover(self) -> None:
        assert self._log_path is not None
        latest: dict[str, dict] = {}
        order: list[str] = []
        with self._log_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                view = record["view"]
                sid = view["session_id"]
                if sid not in latest:
                    order.append(sid)
                latest[sid] = record
        for sid in order:
            record = latest[sid]
            view = record["view"]
            session = ConsultationSession(session_id=sid)
            for item in view["transcript"]:
                session.add_evidence(item["kind"], item["text"])
            session.status = view["status"]
            session.asked_features = set(record.get("asked_features", []))
            session.question_rounds_used = record.get("question_rounds_used", 0)
            rec = view.get("latest_recommendation")
            state = SessionState(
                session=session,
                pending_question=view.get("pending_question"),
                latest_recommendation=_recommendation_from_dict(rec) if rec else None,
            )
            with self._store_lock:
                self._counter += 1
                self._entries[sid] = SessionEntry(state=state, created_order=self._counter)


def _recommendation_from_dict(obj: dict) -> Recommendation:
    from .kg.model import Triplet

    return Recommendation(
        diagnosis=obj["diagnosis"],
        treatment=obj.get("treatment"),
        medication=obj.get("medication"),
        follow_up_question=obj.get("follow_up_question"),
        supporting_ehr_ids=tuple(obj.get("supporting_ehr_ids", [])),
        supporting_triplets=tuple(
            Triplet(disease=t["disease"], relation=t["relation"], feature=t["feature"])
            for t in obj.get("supporting_triplets", [])
        ),
    )


class UtteranceIn(BaseModel):
    text: str | None = None
    audio_ref: str | None = None


class QueryIn(BaseModel):
    text: str


def create_app(
    assets: ServiceAssets | None, settings: ServiceSettings | None = None
) -> FastAPI:
    settings = settings or ServiceSettings()
    app = FastAPI(title="dxcopilot", version="0.1.0")
    app.state.assets = assets
    app.state.store = SessionStore(log_path=settings.session_log_path)
    app.state.settings = settings

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return _error_response(400, "validation", str(exc.errors()[:1]))

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_exception(request: Request, exc: StarletteHTTPException):
        return _error_response(exc.status_code, "http_error", str(exc.detail))

    def check_auth(request: Request) -> None:
        token = settings.bearer_token
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    def require_assets() -> ServiceAssets:
        assets = app.state.assets
        if assets is None:
            raise ApiError(503, "not_ready", "knowledge assets are not loaded")
        return assets

    def run_session_turn(entry: SessionEntry, kind: str, text: str) -> dict:
        """Append evidence and run one turn atomically; commit only on success."""
        assets = require_assets()
        with entry.lock:
            if entry.state.session.status == CONCLUDED:
                raise ApiError(409, "concluded", "session already concluded")
            working = entry.state.session.clone()
            if entry.state.pending_question is not None and kind == "utterance":
                kind = "answer"
            try:
                working.add_evidence(kind, text)
            except ValueError as exc:
                raise ApiError(400, "malformed", str(exc)) from exc
            try:
                result = run_turn(
                    working,
                    assets.kg,
                    assets.corpus,
                    assets.index,
                    assets.encoder,
                    assets.llm,
                    assets.pipeline,
                    assets.question_generator,
                )
            except (LlmUnavailable, ParseFailure) as exc:
                raise ApiError(502, "llm_unavailable", str(exc)) from exc
            if isinstance(result, FollowUpQuestion):
                state = SessionState(
                    session=working,
                    pending_question=result.question,
                    latest_recommendation=entry.state.latest_recommendation,
                )
            else:
                state = SessionState(
                    session=working,
                    pending_question=None,
                    latest_recommendation=result,
                )
            app.state.store.commit(entry, state)
            return session_view(state)

    @app.get("/healthz")
    async def healthz():
        return {"ready": app.state.assets is not None}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        check_auth(request)
        require_assets()
        entry = app.state.store.create()
        return {"session_id": entry.state.session.session_id}

    @app.get("/sessions")
    async def list_sessions(request: Request):
        check_auth(request)
        entries = app.state.store.list_newest_first()
        return {
            "sessions": [
                {
                    "session_id": e.state.session.session_id,
                    "status": e.state.session.status,
                    "evidence_count": len(e.state.session.evidence),
                }
                for e in entries
            ]
        }

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str, request: Request):
        check_auth(request)
        entry = app.state.store.get(session_id)
        return session_view(entry.state)

    @app.post("/sessions/{session_id}/utterances")
    async def post_utterance(session_id: str, body: UtteranceIn, request: Request):
        check_auth(request)
        assets = require_assets()
        entry = app.state.store.get(session_id)
        if (body.text is None) == (body.audio_ref is None):
            raise ApiError(400, "malformed", "provide exactly one of text or audio_ref")
        if body.audio_ref is not None:
            try:
                text = assets.transcriber.transcribe(body.audio_ref)
            except TranscriptionFailure as exc:
                raise ApiError(502, "transcription_failed", str(exc)) from exc
        else:
            text = body.text or ""
        if not text.strip():
            raise ApiError(400, "malformed", "utterance text is empty")
        return run_session_turn(entry, "utterance", text)

    @app.post("/sessions/{session_id}/ehr")
    async def post_ehr(session_id: str, file: UploadFile, request: Request):
        check_auth(request)
        require_assets()
        entry = app.state.store.get(session_id)
        payload = await file.read()
        try:
            record = parse_record_json(payload)
        except MalformedRecord as exc:
            raise ApiError(400, "malformed", f"EHR file invalid: {exc}") from exc
        text = record.manifestation_text
        if record.demographics:
            pairs = "; ".join(f"{k}: {v}" for k, v in sorted(record.demographics.items()))
            text = f"{text}\n{pairs}"
        return run_session_turn(entry, "uploaded-ehr", text)

    @app.post("/query")
    async def query(body: QueryIn, request: Request):
        check_auth(request)
        assets = require_assets()
        if not body.text.strip():
            raise ApiError(400, "empty_text", "query text is empty")
        try:
            rec = one_shot(
                body.text,
                assets.kg,
                assets.corpus,
                assets.index,
                assets.encoder,
                assets.llm,
                assets.pipeline,
                assets.question_generator,
            )
        except (LlmUnavailable, ParseFailure) as exc:
            raise ApiError(502, "llm_unavailable", str(exc)) from exc
        except DxCopilotError as exc:
            raise ApiError(400, "pipeline_error", str(exc)) from exc
        return recommendation_to_dict(rec)

    return app
