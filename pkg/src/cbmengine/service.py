"""Monitoring-station HTTP surface and live event stream.

Exposes assets, rules, anomalies, overrides, and digests over a stable API;
streams the journal as server-sent events with integer cursors; accepts raw
telemetry on a separate stream socket (CBM_LISTEN). Mutating endpoints
require the configured static bearer token; with no token configured they
fail closed.

Asset status precedence (shared with the console): paused, then the maximum
severity among open unacknowledged anomalies, then sensor-fault, else
nominal.
"""

from __future__ import annotations

import asyncio
import json
import time
from typing import Optional

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .config import ServiceConfig, split_host_port
from .detection import LimitRule, Severity
from .engine import (
    AlreadyAcknowledged,
    CursorExpired,
    MonitorEngine,
    NotFound,
    OverrideCommand,
    Unauthorized,
    ValidationFailed,
)
from .store import RangeUnavailable

API_VERSION = 1
STREAM_POLL_SECONDS = 0.05


def now_ms() -> int:
    return int(time.time() * 1000)


def create_app(engine: MonitorEngine, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="cbm monitoring service")
    app.state.engine = engine
    app.state.config = config

    def require_token(authorization: Optional[str] = Header(default=None)) -> None:
        if config.token is None or authorization != f"Bearer {config.token}":
            raise Unauthorized("missing or invalid bearer token")

    @app.exception_handler(Unauthorized)
    async def _unauthorized(request: Request, exc: Unauthorized):
        return JSONResponse(status_code=401, content={"error": str(exc)})

    @app.exception_handler(NotFound)
    async def _not_found(request: Request, exc: NotFound):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(ValidationFailed)
    async def _validation(request: Request, exc: ValidationFailed):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(AlreadyAcknowledged)
    async def _already(request: Request, exc: AlreadyAcknowledged):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(RangeUnavailable)
    async def _range(request: Request, exc: RangeUnavailable):
        return JSONResponse(status_code=410, content={"error": str(exc)})

    @app.exception_handler(CursorExpired)
    async def _cursor(request: Request, exc: CursorExpired):
        return JSONResponse(status_code=410, content={"error": str(exc)})

    @app.get("/assets")
    def list_assets():
        return {"v": API_VERSION, "cursor": engine.cursor, "assets": engine.fleet()}

    @app.get("/assets/{asset_id}/health")
    def asset_health(asset_id: str):
        return {"v": API_VERSION, **engine.asset_health(asset_id)}

    @app.get("/assets/{asset_id}/rules/limits")
    def limit_versions(asset_id: str):
        return {"v": API_VERSION, "versions": engine.limit_rule_versions(asset_id)}

    @app.put("/assets/{asset_id}/rules/limits", dependencies=[Depends(require_token)])
    def put_limit_rule(asset_id: str, payload: dict):
        try:
            rule = LimitRule(
                asset=asset_id,
                channel_kind=payload["channel_kind"],
                lower=payload.get("lower"),
                upper=payload.get("upper"),
                severity_on_breach=Severity(payload.get("severity", "warning")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationFailed(str(exc)) from exc
        author = payload.get("author", "operator")
        version_id = engine.update_limit_rule(asset_id, rule, author, now_ms())
        return {"v": API_VERSION, "version_id": version_id}

    @app.get("/anomalies")
    def anomalies(since: int = Query(default=0)):
        return {
            "v": API_VERSION,
            "cursor": engine.cursor,
            "anomalies": engine.anomalies_since(since),
        }

    @app.post("/anomalies/{anomaly_id}/ack", dependencies=[Depends(require_token)])
    def ack(anomaly_id: str, payload: Optional[dict] = None):
        author = (payload or {}).get("author", "operator")
        state = engine.acknowledge(anomaly_id, author, now_ms())
        return {"v": API_VERSION, "anomaly": state}

    @app.post("/assets/{asset_id}/override", dependencies=[Depends(require_token)])
    def override(asset_id: str, payload: dict):
        cmd = OverrideCommand(
            asset=asset_id,
            target=payload.get("target", ""),
            new_state=payload.get("new_state") or {},
            author=payload.get("author", "operator"),
            reason=payload.get("reason", ""),
            at=now_ms(),
        )
        applied = engine.apply_override(cmd)
        return {"v": API_VERSION, "applied": applied}

    @app.get("/digests")
    def digests(period: str = Query(...), end: int = Query(...)):
        return {
            "v": API_VERSION,
            "digest": engine.generate_digest(period, end, now_ms()),
        }

    @app.get("/events")
    async def events(
        request: Request,
        cursor: int = Query(default=0),
        last_event_id: Optional[str] = Header(default=None, alias="Last-Event-ID"),
    ):
        start_cursor = cursor
        if last_event_id is not None:
            try:
                start_cursor = int(last_event_id)
            except ValueError as exc:
                raise ValidationFailed("Last-Event-ID must be an integer") from exc
        engine.events_after(start_cursor)  # validates the cursor up front

        async def stream():
            at = start_cursor
            while True:
                if await request.is_disconnected():
                    return
                try:
                    batch = engine.events_after(at)
                except CursorExpired:
                    return
                for entry in batch:
                    at = entry["cursor"]
                    data = json.dumps(entry, separators=(",", ":"))
                    yield f"id: {entry['cursor']}\nevent: {entry['type']}\ndata: {data}\n\n"
                await asyncio.sleep(STREAM_POLL_SECONDS)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Cursor": str(engine.cursor)},
        )

    return app


async def run_ingest_socket(
    engine: MonitorEngine, listen: str, *, clock=now_ms
) -> asyncio.AbstractServer:
    """Raw telemetry listener: newline-delimited wire frames."""
    host, port = split_host_port(listen)

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                if line.strip():
                    engine.ingest_line(line, clock())
        finally:
            writer.close()

    return await asyncio.start_server(handle, host, port)


async def run_pumps(engine: MonitorEngine, poll_seconds: float, *, clock=now_ms):
    """Periodic schedule firings and notification escalation."""
    while True:
        engine.run_inspections(clock())
        engine.pump_escalations(clock())
        await asyncio.sleep(poll_seconds)


def make_webhook_notifier(url: str):
    import httpx

    def notify(entry: dict) -> None:
        try:
            httpx.post(url, json=entry, timeout=2.0)
        except Exception:
            pass  # delivery is best-effort; the journal is the source of truth

    return notify
