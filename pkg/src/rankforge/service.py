"""Session-oriented HTTP API over the annotation engine.

Every response embeds api_version 1. Mutations are guarded by a
task_token (hash of the persisted session state) that clients must echo:
a stale token is rejected with 409 and no state change, which makes
double-submits and racing tabs safe. All session state lives in atomically
written snapshot files, so the service can be killed and restarted between
any two calls without observable difference.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse

from . import data as dataio
from .annotation import AnnotationSession, SessionError, load_session, save_session

API_VERSION = 1


def state_token(session: AnnotationSession) -> str:
    return hashlib.sha256(session.snapshot_bytes()).hexdigest()[:16]


class SessionStore:
    """File-backed sessions; reads always come from disk so responses are
    pure functions of persisted state."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.exports_dir = self.data_dir / "exports"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.exports_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def exists(self, session_id: str) -> bool:
        return self.path(session_id).is_file()

    def load(self, session_id: str) -> AnnotationSession:
        return load_session(self.path(session_id))

    def save(self, session: AnnotationSession) -> None:
        save_session(session, self.path(session.session_id))


def _manifest(session: AnnotationSession, image_source: str | None) -> dict:
    return {
        "api_version": API_VERSION,
        "session_id": session.session_id,
        "item_count": len(session.item_ids),
        "n_sub": session.sublist_size,
        "phase": session.phase,
        "created_ts": session.created_ts,
        "updated_ts": session.updated_ts,
        "image_source": image_source,
        "task_token": state_token(session),
        "progress": {
            "answered": session.answered(),
            "estimated_remaining": session.estimated_remaining(),
        },
    }


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"api_version": API_VERSION, "error": message}
    )


def create_app(data_dir: str | Path, image_source: str | None = None) -> FastAPI:
    app = FastAPI(title="rankforge annotation service")
    # The browser UI is served from its own dev/build origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(Path(data_dir))

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "request body must be JSON")
        item_ids = body.get("item_ids")
        if item_ids is None and body.get("dataset"):
            try:
                ds = dataio.load(body["dataset"])
            except (OSError, dataio.DatasetError) as exc:
                return _error(400, f"cannot load dataset: {exc}")
            item_ids = [it.id for it in ds.items]
        if not isinstance(item_ids, list) or not item_ids:
            return _error(400, "item_ids (or dataset) required")
        try:
            session = AnnotationSession(
                item_ids,
                sublist_size=int(body.get("n_sub", 6)),
                seed=body.get("seed"),
            )
        except (SessionError, TypeError, ValueError) as exc:
            return _error(400, str(exc))
        with store.lock(session.session_id):
            store.save(session)
        return _manifest(session, image_source)

    @app.get("/sessions/{session_id}")
    def get_manifest(session_id: str):
        if not store.exists(session_id):
            return _error(404, f"unknown session {session_id!r}")
        return _manifest(store.load(session_id), image_source)

    @app.get("/sessions/{session_id}/task")
    def get_task(session_id: str):
        if not store.exists(session_id):
            return _error(404, f"unknown session {session_id!r}")
        session = store.load(session_id)
        if session.phase == "done":
            return _error(409, "session complete")
        task = session.current_task()
        payload = {
            "api_version": API_VERSION,
            "task_token": state_token(session),
            "kind": task.kind,
            "progress": {
                "answered": task.answered,
                "estimated_remaining": task.estimated_remaining,
            },
        }
        if task.kind == "sort":
            payload["ids"] = list(task.ids)
        else:
            payload["id_a"] = task.id_a
            payload["id_b"] = task.id_b
        return payload

    @app.post("/sessions/{session_id}/response")
    async def post_response(session_id: str, request: Request):
        if not store.exists(session_id):
            return _error(404, f"unknown session {session_id!r}")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "request body must be JSON")
        with store.lock(session_id):
            session = store.load(session_id)
            token = body.get("task_token")
            if token != state_token(session):
                return _error(409, "stale task_token; refetch the current task")
            try:
                if body.get("undo"):
                    session.undo()
                elif "order" in body:
                    session.submit_response({"kind": "sort", "order": body["order"]})
                elif "choice" in body:
                    session.submit_response({"kind": "compare", "choice": body["choice"]})
                else:
                    return _error(400, "response needs order, choice, or undo")
            except SessionError as exc:
                return _error(400, str(exc))
            store.save(session)
        return {
            "api_version": API_VERSION,
            "phase": session.phase,
            "task_token": state_token(session),
            "progress": {
                "answered": session.answered(),
                "estimated_remaining": session.estimated_remaining(),
            },
        }

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        if not store.exists(session_id):
            return _error(404, f"unknown session {session_id!r}")
        session = store.load(session_id)
        if session.phase != "done":
            return _error(409, "session incomplete")
        ranking = session.export_ranking()
        rows = sorted(ranking.items(), key=lambda kv: -kv[1])
        overlay = store.exports_dir / f"{session_id}.jsonl"
        header = {"format": "rankforge-ranks", "version": 1, "n": len(rows)}
        lines = [json.dumps(header)] + [
            json.dumps({"id": i, "rank": r}) for i, r in rows
        ]
        overlay.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return {
            "api_version": API_VERSION,
            "session_id": session_id,
            "ranking": [{"id": i, "rank": r} for i, r in rows],
        }

    @app.get("/items/{item_id}/image")
    def item_image(item_id: str):
        if not image_source:
            return _error(404, "no image source configured")
        if "{id}" in image_source:
            return RedirectResponse(
                url=image_source.replace("{id}", item_id), status_code=307
            )
        src = Path(image_source)
        for ext in ("", ".png", ".jpg", ".jpeg", ".gif"):
            candidate = src / f"{item_id}{ext}"
            if candidate.is_file():
                return FileResponse(candidate)
        return _error(404, f"no image for item {item_id!r}")

    return app
