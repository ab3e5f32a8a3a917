"""HTTP API backing the review UI and external evaluators.

Errors come back as problem JSON with stable codes: not_found (404),
conflict (409), validation_error (422). A static bearer token can be
required for everything except /health.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import NotFoundError, ToolkitError
from .store import COLLECTIONS, ReviewDecision, Store

_STATUS_BY_CODE = {
    "not_found": 404,
    "conflict": 409,
    "validation_error": 422,
    "integrity_error": 500,
}


def _problem(code: str, message: str, fields: dict | None = None, status: int | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if fields:
        body["fields"] = fields
    return JSONResponse(status_code=status or _STATUS_BY_CODE.get(code, 500), content=body)


class DecisionBody(BaseModel):
    decision_id: str
    reviewer_id: str
    action: str
    category: str | None = None
    adjusted_answer: str | None = None
    adjusted_span_map: dict[str, list[list[float]]] | None = None
    timestamp: str | None = None


def create_app(store: Store, static_dir: str | Path | None = None, token: str | None = None) -> FastAPI:
    app = FastAPI(title="spanhop review service", docs_url=None, redoc_url=None)

    class _AuthError(Exception):
        pass

    auth_dep = []
    if token:

        async def check(authorization: str | None = Header(default=None)) -> None:
            if authorization != f"Bearer {token}":
                raise _AuthError()

        auth_dep = [Depends(check)]

    @app.exception_handler(_AuthError)
    async def _auth_handler(request: Request, exc: _AuthError):
        return _problem("unauthorized", "missing or invalid bearer token", status=401)

    @app.exception_handler(ToolkitError)
    async def _toolkit_handler(request: Request, exc: ToolkitError):
        fields = getattr(exc, "fields", None)
        return _problem(exc.code, str(exc), fields)

    @app.exception_handler(RequestValidationError)
    async def _request_validation_handler(request: Request, exc: RequestValidationError):
        fields = {
            ".".join(str(loc) for loc in err["loc"] if loc != "body"): err["msg"]
            for err in exc.errors()
        }
        return _problem("validation_error", "request body failed validation", fields)

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "collections": {name: len(store.keys(name)) for name in COLLECTIONS},
        }

    @app.get("/status/pipeline", dependencies=auth_dep)
    async def pipeline_status():
        """Stage counts of the last/ongoing pipeline run (poll while running)."""
        progress_path = store.root / "progress.json"
        progress = None
        if progress_path.exists():
            import json

            progress = json.loads(progress_path.read_text(encoding="utf-8"))
        return {
            "collections": {name: len(store.keys(name)) for name in COLLECTIONS},
            "pipeline": progress,
        }

    @app.get("/clips/{clip_id}", dependencies=auth_dep)
    async def get_clip(clip_id: str):
        record = store.get("clips", clip_id)
        if record is None:
            raise NotFoundError(f"clip {clip_id} not found")
        return record

    @app.get("/triplets", dependencies=auth_dep)
    async def list_triplets(
        status: str | None = None,
        clip_id: str | None = None,
        category: str | None = None,
        limit: int = 50,
        offset: int = 0,
    ):
        filters = {}
        if status is not None:
            filters["status"] = status
        if clip_id is not None:
            filters["clip_id"] = clip_id
        if category is not None:
            filters["category"] = category
        records = store.list("triplets", **filters)
        window = records[offset : offset + max(0, limit)]
        return {"items": window, "total": len(records), "limit": limit, "offset": offset}

    @app.get("/triplets/{triplet_id}", dependencies=auth_dep)
    async def get_triplet(triplet_id: str):
        record = store.get("triplets", triplet_id)
        if record is None:
            raise NotFoundError(f"triplet {triplet_id} not found")
        return record

    @app.get("/triplets/{triplet_id}/history", dependencies=auth_dep)
    async def triplet_history(triplet_id: str):
        return {"triplet_id": triplet_id, "decisions": store.decision_history(triplet_id)}

    @app.post("/triplets/{triplet_id}/decision", dependencies=auth_dep)
    async def post_decision(triplet_id: str, body: DecisionBody):
        decision = ReviewDecision(
            decision_id=body.decision_id,
            triplet_id=triplet_id,
            reviewer_id=body.reviewer_id,
            action=body.action,
            category=body.category,
            adjusted_answer=body.adjusted_answer,
            adjusted_span_map=body.adjusted_span_map,
            timestamp=body.timestamp,
        )
        return store.apply_review(decision)

    @app.get("/metrics/run/{run_id}", dependencies=auth_dep)
    async def metrics_run(run_id: str):
        record = store.get("runs", run_id)
        if record is None:
            raise NotFoundError(f"run {run_id} not found")
        return record

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
