"""Network layer: REST endpoints plus the websocket wire protocol.

One long-lived websocket per client carries JSON-framed WireEvents in both
directions (docs/wire-protocol.md). The first client frame must be ``join``;
after that the service fans room events out to every connected member, with
``result_page`` personalized per user.
"""

from __future__ import annotations

import asyncio
from typing import Any

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .model import canonical_json
from .service import ChatService, ServiceError, UnknownRoom


class CreateRoomBody(BaseModel):
    room_id: str | None = None


class JoinBody(BaseModel):
    user_id: str


def create_app(service: ChatService) -> FastAPI:
    app = FastAPI(title="searchroom", version="0.1.0")
    app.state.service = service

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/rooms")
    def create_room(body: CreateRoomBody) -> dict[str, str]:
        try:
            return {"room_id": service.create_room(body.room_id)}
        except ServiceError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.post("/rooms/{room_id}/members")
    def join_room(room_id: str, body: JoinBody) -> dict[str, str]:
        try:
            service.join(room_id, body.user_id)
        except UnknownRoom as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"room_id": room_id, "user_id": body.user_id}

    @app.get("/rooms/{room_id}/history")
    def history(room_id: str) -> dict[str, Any]:
        try:
            utterances = service.history(room_id)
        except UnknownRoom as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"room_id": room_id, "utterances": [u.to_dict() for u in utterances]}

    @app.get("/logs/export", response_class=PlainTextResponse)
    def export_logs(room_id: str | None = None) -> str:
        if room_id is not None:
            records = service.logs.scan(room_id)
        else:
            records = list(service.logs.export_merged())
        lines = [canonical_json(r.to_dict()) for r in records]
        return "\n".join(lines) + ("\n" if lines else "")

    @app.get("/logs/{room_id}")
    def logs_for_room(room_id: str, record_type: str | None = None) -> dict[str, Any]:
        records = service.logs.scan(
            room_id, record_types=[record_type] if record_type else None
        )
        return {"room_id": room_id, "records": [r.to_dict() for r in records]}

    @app.websocket("/ws")
    async def websocket_endpoint(socket: WebSocket) -> None:
        await socket.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue[dict[str, Any]] = asyncio.Queue()
        connection_id: str | None = None

        def deliver(event: dict[str, Any]) -> None:
            # Called from service worker threads; hop onto the socket's loop.
            loop.call_soon_threadsafe(outbox.put_nowait, event)

        async def sender() -> None:
            while True:
                event = await outbox.get()
                await socket.send_json(event)

        send_task = asyncio.create_task(sender())
        room_id = user_id = None
        try:
            first = await socket.receive_json()
            if first.get("type") != "join":
                await socket.send_json(
                    {"type": "error", "code": "protocol", "text": "first frame must be join"}
                )
                return
            room_id, user_id = first["room_id"], first["user_id"]
            service.join(room_id, user_id)
            connection_id = await asyncio.to_thread(
                service.connect, room_id, user_id, deliver
            )
            while True:
                frame = await socket.receive_json()
                await asyncio.to_thread(_handle_frame, service, room_id, user_id, frame, deliver)
        except WebSocketDisconnect:
            pass
        except UnknownRoom as exc:
            await socket.send_json({"type": "error", "code": "unknown_room", "text": str(exc)})
        finally:
            send_task.cancel()
            if connection_id is not None:
                service.disconnect(connection_id)

    return app


def _handle_frame(
    service: ChatService, room_id: str, user_id: str, frame: dict[str, Any], deliver
) -> None:
    """Dispatch one client frame; service errors become error events."""
    kind = frame.get("type")
    try:
        if kind in ("post_message", "clarification_reply"):
            # A clarification reply is an ordinary message; the pipeline
            # decides whether it resumes a pending question.
            service.post_message(room_id, user_id, frame.get("text", ""))
        elif kind == "page_nav":
            service.page_nav(room_id, user_id, frame.get("direction", ""))
        elif kind == "click":
            link = service.click(room_id, user_id, int(frame.get("rank", 0)))
            deliver({"type": "click_result", "rank": frame.get("rank"), "link": link})
        else:
            deliver({"type": "error", "code": "protocol", "text": f"unknown frame type {kind!r}"})
    except ServiceError as exc:
        deliver({"type": "error", "code": exc.code, "text": str(exc)})


def app_from_config(config_path: str) -> FastAPI:
    from .config import AppConfig

    return create_app(AppConfig.load(config_path).build_service())
