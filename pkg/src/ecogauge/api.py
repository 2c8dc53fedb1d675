"""HTTP surface for the UI: state reads, event ingestion, and an SSE stream."""

from __future__ import annotations

import json
import queue
from datetime import datetime, timezone
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, ConfigDict

from .ingest import HttpTransactionRecord
from .service import UI_EVENT_KINDS, Service


class TransactionIn(BaseModel):
    model_config = ConfigDict(extra="ignore")  # tolerant reader: extras dropped

    user_id: str
    method: str
    url: str
    status: int
    observed_at: datetime
    idempotency_key: Optional[str] = None


class UiEventIn(BaseModel):
    model_config = ConfigDict(extra="ignore")

    user_id: str
    kind: str
    at: Optional[datetime] = None


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="ecogauge", version="0.1.0")
    app.state.service = service

    def check_auth(request: Request) -> None:
        token = service.config.auth_token
        if token is None:
            return
        supplied = request.headers.get("Authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.get("/v1/healthz")
    def healthz() -> dict:
        return service.health()

    @app.get("/v1/config", dependencies=[Depends(check_auth)])
    def config() -> dict:
        return service.public_config()

    @app.get("/v1/state/{user_id}", dependencies=[Depends(check_auth)])
    def get_state(user_id: str) -> dict:
        return service.get_state(user_id)

    @app.post("/v1/events/transaction", dependencies=[Depends(check_auth)])
    def post_transaction(body: TransactionIn) -> dict:
        if body.observed_at.tzinfo is None:
            raise HTTPException(status_code=422, detail="observed_at must include a timezone")
        record = HttpTransactionRecord(
            user_id=body.user_id,
            method=body.method,
            url=body.url,
            status=body.status,
            observed_at=body.observed_at,
            idempotency_key=body.idempotency_key,
        )
        return service.handle_transaction(record)

    @app.post("/v1/events/ui", dependencies=[Depends(check_auth)])
    def post_ui_event(body: UiEventIn) -> dict:
        if body.kind not in UI_EVENT_KINDS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown ui event kind {body.kind!r}; expected one of {list(UI_EVENT_KINDS)}",
            )
        at = body.at or datetime.now(timezone.utc)
        if at.tzinfo is None:
            raise HTTPException(status_code=422, detail="at must include a timezone")
        return service.post_ui_event(body.user_id, body.kind, at)

    @app.get("/v1/stream/{user_id}", dependencies=[Depends(check_auth)])
    def stream(user_id: str) -> StreamingResponse:
        """One-way update stream: a bundle on every event plus periodic accrual ticks."""
        return StreamingResponse(bundle_stream(service, user_id),
                                 media_type="text/event-stream")

    return app


def bundle_stream(service: Service, user_id: str):
    """Yield SSE frames: current state first, then one per event or idle tick."""
    q = service.subscribe(user_id)
    tick = service.config.stream_tick_seconds
    try:
        yield _sse(service.get_state(user_id))
        while True:
            try:
                bundle = q.get(timeout=tick)
            except queue.Empty:
                bundle = service.get_state(user_id)  # accrual tick
            yield _sse(bundle)
    finally:
        service.unsubscribe(user_id, q)


def _sse(bundle: dict) -> str:
    return f"data: {json.dumps(bundle, separators=(',', ':'))}\n\n"
