"""HTTP facade over sessions: a thin adapter, no logic of its own.

Any transcript executed through these endpoints must produce byte-identical
session snapshots to the same transcript driven through the library. Mutating
requests on one session are serialized by a non-blocking per-session lock:
a conflicting concurrent mutation is rejected with 409, never queued. While
the model is re-sampling, the session reports an "updating" status.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import session as session_mod
from .dataset import Dataset, heatmap_summary
from .descriptors import DescriptorMatrix
from .errors import ElicitError, NotFoundError, StateConflictError, ValidationError
from .session import Condition, Session, SessionConfig


@dataclass
class _SessionEntry:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)
    status: str = "ready"


@dataclass
class _Registry:
    """All mutable service state: named datasets and live sessions."""

    datasets: dict[str, tuple[Dataset, Dataset, DescriptorMatrix]]
    config: SessionConfig
    entries: dict[str, _SessionEntry] = field(default_factory=dict)
    create_lock: threading.Lock = field(default_factory=threading.Lock)

    def get(self, session_id: str) -> _SessionEntry:
        entry = self.entries.get(session_id)
        if entry is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return entry


def _feature_names(session: Session, ids) -> list[str]:
    return [session.train.feature_names[j] for j in ids]


def _pending_payload(reg: _Registry, session: Session) -> dict | None:
    if session.pending_query is None:
        return None
    names = _feature_names(session, session.pending_query)
    heat = heatmap_summary(session.train, session.pending_query)
    return {"features": names, "heatmap": heat.to_payload()}


def _view(reg: _Registry, entry: _SessionEntry) -> dict:
    s = entry.session
    return {
        "id": s.id,
        "condition": s.condition.value,
        "iteration": s.t,
        "status": entry.status,
        "terminal": s.terminal,
        "pending_query": _pending_payload(reg, s),
        "metrics": {
            "mse": s.mse_history[-1],
            "n_relevant": int(s.r.sum()),
        },
    }


def create_app(
    train: Dataset,
    test: Dataset,
    descriptors: DescriptorMatrix,
    config: SessionConfig | None = None,
    dataset_name: str = "default",
) -> FastAPI:
    """Build the app around one named dataset triple."""
    reg = _Registry(
        datasets={dataset_name: (train, test, descriptors)},
        config=config or SessionConfig(),
    )
    app = FastAPI(title="elicit", docs_url=None, redoc_url=None)
    # the browser client is served from its own origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.registry = reg

    @app.exception_handler(ElicitError)
    async def _elicit_error(request: Request, exc: ElicitError):
        status = 422
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, StateConflictError):
            status = 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        dataset_ref = body.get("dataset", dataset_name)
        triple = reg.datasets.get(dataset_ref)
        if triple is None:
            raise NotFoundError(f"unknown dataset {dataset_ref!r}")
        if "condition" not in body:
            raise ValidationError("request body must include 'condition'")
        condition = Condition.parse(body["condition"])
        try:
            seed = int(body.get("seed", 0))
        except (TypeError, ValueError):
            raise ValidationError("'seed' must be an integer") from None
        session_id = body.get("id")
        if session_id is not None and not isinstance(session_id, str):
            raise ValidationError("'id' must be a string")
        with reg.create_lock:
            if session_id is not None and session_id in reg.entries:
                raise StateConflictError(f"session {session_id!r} already exists")
            tr, te, z = triple
            session = session_mod.create(
                tr, te, z, condition, reg.config, seed=seed, session_id=session_id
            )
            if session.id in reg.entries:
                raise StateConflictError(f"session {session.id!r} already exists")
            entry = _SessionEntry(session=session)
            reg.entries[session.id] = entry
        return _view(reg, entry)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _view(reg, reg.get(session_id))

    @app.post("/sessions/{session_id}/query")
    def post_query(session_id: str):
        entry = reg.get(session_id)
        if not entry.lock.acquire(blocking=False):
            raise StateConflictError("session is busy with another request")
        try:
            session_mod.next_query(entry.session)
            return _view(reg, entry)
        finally:
            entry.lock.release()

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: dict = Body(...)):
        entry = reg.get(session_id)
        session = entry.session
        if not entry.lock.acquire(blocking=False):
            raise StateConflictError("session is busy with another request")
        try:
            pending = session.pending_query
            if pending is None:
                raise StateConflictError("no pending query to answer")
            pending_names = {
                session.train.feature_names[j]: j for j in pending
            }
            responses = {}
            for name, value in body.items():
                if name not in pending_names:
                    raise ValidationError(
                        f"feature {name!r} is not part of the pending query"
                    )
                if value not in (0, 1):
                    raise ValidationError(
                        f"response for feature {name!r} must be 0 or 1"
                    )
                responses[pending_names[name]] = int(value)
            missing = [n for n in pending_names if n not in body]
            if missing:
                raise ValidationError(
                    f"missing response for feature {missing[0]!r}"
                )
            entry.status = "updating"
            try:
                result = session_mod.submit_feedback(session, responses)
            finally:
                entry.status = "ready"
            return {
                "iteration": result.iteration,
                "mse": result.mse,
                "n_positive": result.n_positive,
                "n_negative": result.n_negative,
                "mean_relevance": result.mean_relevance,
                "predictions_digest": result.predictions_digest,
            }
        finally:
            entry.lock.release()

    @app.get("/sessions/{session_id}/heatmap")
    def get_heatmap(session_id: str, features: str = Query(...)):
        entry = reg.get(session_id)
        names = [n for n in features.split(",") if n]
        if not names:
            raise ValidationError("features parameter must name at least one feature")
        ids = [entry.session.train.feature_index(n) for n in names]
        heat = heatmap_summary(entry.session.train, ids)
        return heat.to_payload()

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        entry = reg.get(session_id)
        s = entry.session
        positive = [
            s.train.feature_names[j] for j in range(s.n_features) if s.r[j] == 1
        ]
        return {
            "mse_history": list(s.mse_history),
            "relevance": {
                "n_positive": int(s.r.sum()),
                "positive_features": positive,
            },
        }

    @app.get("/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str):
        return session_mod.snapshot(reg.get(session_id).session)

    return app
