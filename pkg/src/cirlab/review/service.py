"""HTTP API over the review store, consumed by the browser frontend and any
scripted reviewer.

Routes: GET /queues, GET /queues/{stage}/next, GET /items/{id},
POST /items/{id}/decision, GET /tokenize, GET /assets/{image_id}.
Reviewer identity is the X-Reviewer-Id header; an optional bearer token can
be required for decisions.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..core.types import DatasetManifest
from .store import (
    STAGES,
    AlreadyDecidedError,
    InvalidVerdictError,
    ReviewError,
    ReviewStore,
)


class DecisionBody(BaseModel):
    verdict: str
    edited_text: Optional[str] = None


def _item_payload(store: ReviewStore, item_id: str) -> dict:
    item = store.get(item_id)
    decision = store.decision(item_id)
    out = item.to_dict()
    out["decision"] = decision.to_dict() if decision else None
    return out


def create_app(
    store: ReviewStore,
    manifest: DatasetManifest | None = None,
    static_dir: str | Path | None = None,
    auth_token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="review-service")
    images = manifest.images() if manifest is not None else {}

    def check_auth(authorization: str | None) -> None:
        if auth_token is None:
            return
        if authorization != f"Bearer {auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.get("/queues")
    def queues():
        return {"queues": store.open_counts(), "open_total": store.open_count()}

    @app.get("/queues/{stage}/next")
    def next_item(stage: str):
        if stage not in STAGES:
            raise HTTPException(status_code=422, detail=f"unknown stage {stage!r}; stages: {list(STAGES)}")
        item = store.next_open(stage)
        if item is None:
            raise HTTPException(status_code=404, detail=f"no open items for stage {stage!r}")
        return _item_payload(store, item.id)

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        try:
            return _item_payload(store, item_id)
        except ReviewError as e:
            raise HTTPException(status_code=404, detail=str(e))

    @app.post("/items/{item_id}/decision")
    def decide(
        item_id: str,
        body: DecisionBody,
        x_reviewer_id: str = Header(default="anonymous"),
        authorization: str | None = Header(default=None),
    ):
        check_auth(authorization)
        try:
            item = store.decide(
                item_id, body.verdict, edited_text=body.edited_text, reviewer=x_reviewer_id
            )
        except AlreadyDecidedError as e:
            raise HTTPException(status_code=409, detail=str(e))
        except InvalidVerdictError as e:
            raise HTTPException(status_code=422, detail=str(e))
        except ReviewError as e:
            raise HTTPException(status_code=404, detail=str(e))
        return _item_payload(store, item.id)

    @app.get("/tokenize")
    def tokenize(text: str = Query(default="")):
        return {
            "token_count": store.tokenizer.count(text),
            "limit": store.token_limit,
            "tokenizer": store.tokenizer.name,
        }

    @app.get("/assets/{image_id}")
    def asset(image_id: str):
        ref = images.get(image_id)
        if ref is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        path = Path(ref.uri)
        if path.exists() and path.is_file():
            return FileResponse(path)
        # non-file URIs (vec://, synthetic://, remote) pass through as a descriptor
        return JSONResponse({"id": ref.id, "uri": ref.uri, "split": ref.split})

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
