"""WebSocket/HTTP transport around a SessionHost.

One engine loop thread per connected session keeps evolving and pushes
`suggestions/published` / `model/status` on the configured cadence; inbound
messages are handled between generations under the host lock. Save/load is
also reachable over plain HTTP as a request/response fallback.
"""
from __future__ import annotations

import argparse
import asyncio
import logging
import threading
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import AppConfig
from .errors import RoomforgeError
from .service import SessionHost

logger = logging.getLogger(__name__)


class _Ticker:
    """Background engine loop for one session; stops with the connection."""

    def __init__(self, host: SessionHost, lock: threading.Lock, session_id: str,
                 loop: asyncio.AbstractEventLoop, queue: asyncio.Queue):
        self.host = host
        self.lock = lock
        self.session_id = session_id
        self.loop = loop
        self.queue = queue
        self.stop = threading.Event()
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        interval = self.host.config.service.publish_every_ms / 1000.0
        last_publish = time.monotonic()
        while not self.stop.is_set():
            with self.lock:
                if self.session_id not in self.host.sessions:
                    return
                outbound = self.host.tick(self.session_id, generations=1)
                now = time.monotonic()
                if not outbound and now - last_publish >= interval:
                    session = self.host.sessions[self.session_id]
                    outbound = [self.host._published(session, session.publish())]
                if outbound:
                    last_publish = now
            for message in outbound:
                asyncio.run_coroutine_threadsafe(self.queue.put(message), self.loop)


def create_app(config: AppConfig | None = None,
               session_dir: str | None = None,
               frontend_dir: str | None = None,
               live: bool = True) -> FastAPI:
    config = config or AppConfig()
    host = SessionHost(config, session_dir)
    lock = threading.Lock()
    app = FastAPI(title="roomforge")
    app.state.host = host
    app.state.lock = lock

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "sessions": sorted(host.sessions)}

    @app.post("/sessions/{session_id}/save")
    def save_session(session_id: str, payload: dict) -> JSONResponse:
        message = {"kind": "session/save", "seq": -1,
                   "payload": dict(payload, sessionId=session_id)}
        with lock:
            replies = host.handle(message)
        status = 400 if replies[0]["kind"] == "error" else 200
        return JSONResponse(replies[0], status_code=status)

    @app.post("/sessions/load")
    def load_session(payload: dict) -> JSONResponse:
        message = {"kind": "session/load", "seq": -1, "payload": payload}
        with lock:
            replies = host.handle(message)
        status = 400 if replies[0]["kind"] == "error" else 200
        return JSONResponse(replies[0], status_code=status)

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()
        ticker: _Ticker | None = None
        loop = asyncio.get_running_loop()

        async def pump_outbound():
            while True:
                await ws.send_json(await queue.get())

        pusher = asyncio.create_task(pump_outbound())
        try:
            while True:
                try:
                    message = await ws.receive_json()
                except ValueError:
                    await ws.send_json({"kind": "error", "seq": -1, "payload": {
                        "code": "MalformedInput", "message": "not valid JSON",
                        "re": None}})
                    continue
                with lock:
                    replies = host.handle(message)
                for reply in replies:
                    await ws.send_json(reply)
                if (live and ticker is None
                        and isinstance(message, dict)
                        and message.get("kind") in ("session/start", "session/load")
                        and replies and replies[0]["kind"] != "error"):
                    session_id = replies[0]["payload"]["sessionId"]
                    ticker = _Ticker(host, lock, session_id, loop, queue)
                    ticker.thread.start()
        except WebSocketDisconnect:
            pass
        finally:
            if ticker is not None:
                ticker.stop.set()
            pusher.cancel()

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="app")
    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="roomforge-serve")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--config", metavar="FILE")
    parser.add_argument("--session-dir", metavar="DIR")
    parser.add_argument("--frontend", metavar="DIR",
                        help="directory with the built web editor")
    args = parser.parse_args(argv)
    try:
        config = AppConfig.load(args.config) if args.config else AppConfig()
    except RoomforgeError as exc:
        parser.error(str(exc))
    import uvicorn
    app = create_app(config, args.session_dir, args.frontend)
    uvicorn.run(app, host=args.host or config.service.listen_host,
                port=args.port or config.service.listen_port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
