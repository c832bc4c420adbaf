"""HTTP service: session-based conversation over the loaded engine.

Sessions persist as append-only JSONL event logs under the data directory
(one file per session), so a restart reloads identical turn history.
Posts to the same session serialize through a per-session lock; engine
artifacts are immutable and shared read-only across requests.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import CellRef, TableDocument
from .responder import Engine, Mode, ProviderError, answer_turn, provider_from_env
from .tracker import DialogueHistory


@dataclass
class SessionTurn:
    query: str
    response: str
    table_id: str
    knowledge: list[dict]


@dataclass
class Session:
    session_id: str
    created_at: float
    mode: Mode
    provider_kind: str
    active_table_id: str | None = None
    turns: list[SessionTurn] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "mode": self.mode.value,
            "provider": self.provider_kind,
            "active_table_id": self.active_table_id,
            "turns": [
                {
                    "query": t.query,
                    "response": t.response,
                    "table_id": t.table_id,
                    "knowledge": t.knowledge,
                }
                for t in self.turns
            ],
        }


class SessionStore:
    """JSONL event log per session: a "created" event then one per turn."""

    def __init__(self, data_dir: str | Path):
        self.dir = Path(data_dir) / "sessions"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self._load()

    def _path(self, session_id: str) -> Path:
        return self.dir / f"{session_id}.jsonl"

    def _load(self) -> None:
        for path in sorted(self.dir.glob("*.jsonl")):
            session: Session | None = None
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    if event["event"] == "created":
                        session = Session(
                            session_id=event["session_id"],
                            created_at=event["created_at"],
                            mode=Mode(event["mode"]),
                            provider_kind=event["provider"],
                        )
                    elif event["event"] == "turn" and session is not None:
                        session.active_table_id = event["table_id"]
                        session.turns.append(
                            SessionTurn(
                                query=event["query"],
                                response=event["response"],
                                table_id=event["table_id"],
                                knowledge=event["knowledge"],
                            )
                        )
            if session is not None:
                self.sessions[session.session_id] = session

    def create(self, mode: Mode, provider_kind: str) -> Session:
        session = Session(
            session_id=secrets.token_hex(16),
            created_at=time.time(),
            mode=mode,
            provider_kind=provider_kind,
        )
        self.sessions[session.session_id] = session
        with open(self._path(session.session_id), "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "event": "created",
                        "session_id": session.session_id,
                        "created_at": session.created_at,
                        "mode": session.mode.value,
                        "provider": session.provider_kind,
                    }
                )
                + "\n"
            )
        return session

    def append_turn(self, session: Session, turn: SessionTurn) -> None:
        # persisted before the response is returned to the caller
        with open(self._path(session.session_id), "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "event": "turn",
                        "query": turn.query,
                        "response": turn.response,
                        "table_id": turn.table_id,
                        "knowledge": turn.knowledge,
                    }
                )
                + "\n"
            )
        session.turns.append(turn)
        session.active_table_id = turn.table_id


class CreateSessionRequest(BaseModel):
    mode: str = "top3"
    provider: str = "mock"


class PostMessageRequest(BaseModel):
    query: str


def table_to_json(t: TableDocument) -> dict:
    return {
        "table_id": t.table_id,
        "page_title": t.page_title,
        "page_intro": t.page_intro,
        "section_title": t.section_title,
        "section_intro": t.section_intro,
        "headers": list(t.headers),
        "rows": [
            [{"value": c.value, "linked_text": c.linked_text} for c in row] for row in t.rows
        ],
    }


def create_app(engine: Engine, data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="grounder")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["http://localhost:5173", "http://127.0.0.1:5173", "http://localhost:8000"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)
    app.state.engine = engine
    app.state.store = store

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "tables": len(engine.corpus),
            "dense_index": engine.dense is not None,
        }

    @app.post("/api/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            mode = Mode(req.mode)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
        if req.provider not in ("mock", "http"):
            raise HTTPException(status_code=400, detail=f"unknown provider {req.provider!r}")
        if engine.dense is None:
            raise HTTPException(status_code=503, detail="engine has no dense index loaded")
        session = store.create(mode, req.provider)
        return {"session_id": session.session_id}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, req: PostMessageRequest):
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if not req.query.strip():
            raise HTTPException(status_code=400, detail="empty query")
        with session.lock:
            history = DialogueHistory(
                turns=tuple((t.query, t.response) for t in session.turns),
                current_query=req.query,
            )
            provider = (
                engine.provider
                if session.provider_kind == "mock"
                else provider_from_env("http")
            )
            request_engine = engine if session.provider_kind == "mock" else _with_provider(engine, provider)
            try:
                result = answer_turn(
                    request_engine, history, session.mode, session.active_table_id
                )
            except ProviderError as exc:
                raise HTTPException(status_code=502, detail=str(exc))
            knowledge = [
                {
                    "cell": {"table_id": ref.table_id, "row": ref.row, "col": ref.col},
                    "score": score,
                    "text": text,
                }
                for ref, score, text in result.ranked_knowledge
            ]
            turn = SessionTurn(
                query=req.query,
                response=result.response,
                table_id=result.table_id,
                knowledge=knowledge,
            )
            store.append_turn(session, turn)
        return {"response": result.response, "table_id": result.table_id, "knowledge": knowledge}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session.to_json()

    @app.get("/api/tables/{table_id}")
    def get_table(table_id: str):
        table = engine.corpus.get(table_id)
        if table is None:
            raise HTTPException(status_code=404, detail="unknown table")
        return table_to_json(table)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _with_provider(engine: Engine, provider) -> Engine:
    return Engine(
        encoder=engine.encoder,
        corpus=engine.corpus,
        dense=engine.dense,
        bm25=engine.bm25,
        stopwords=engine.stopwords,
        provider=provider,
    )
