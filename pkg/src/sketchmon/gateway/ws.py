"""Browser transport: the same JSON protocol, one message per WebSocket
text frame, plus static-asset serving for the web client on the same port."""

from __future__ import annotations

import asyncio
import http
import itertools
import logging
import mimetypes
import time
from pathlib import Path
from typing import Optional

from websockets.asyncio.server import Server, ServerConnection, serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from sketchmon.gateway.core import GatewayCore
from sketchmon.gateway.protocol import WireMessage, encode_message

log = logging.getLogger(__name__)

POLL_INTERVAL_S = 0.05


class WsGateway:
    def __init__(
        self,
        core: GatewayCore,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: str | Path | None = None,
    ):
        self.core = core
        self.host = host
        self.port = port
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self._server: Optional[Server] = None
        self._conns: dict[str, ServerConnection] = {}
        self._counter = itertools.count()
        self._poll_task: Optional[asyncio.Task] = None

    async def start(self) -> "WsGateway":
        self._server = await serve(
            self._handle,
            self.host,
            self.port,
            process_request=self._process_request,
        )
        self.port = self._server.sockets[0].getsockname()[1]
        self._poll_task = asyncio.ensure_future(self._poll_loop())
        return self

    async def stop(self) -> None:
        if self._poll_task:
            self._poll_task.cancel()
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    def _process_request(self, connection: ServerConnection, request):
        """Serve the static bundle for plain HTTP requests; None upgrades."""
        if "Upgrade" in request.headers.get("Connection", "") or request.headers.get(
            "Upgrade"
        ):
            return None
        if self.static_dir is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND, "no static bundle\n")
        rel = request.path.split("?")[0].lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        body = target.read_bytes()
        headers = Headers()
        headers["Content-Type"] = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        headers["Content-Length"] = str(len(body))
        headers["Connection"] = "close"
        return Response(http.HTTPStatus.OK, "OK", headers, body)

    def _dispatch(self, outbound) -> None:
        for conn_id, msg in outbound:
            ws = self._conns.get(conn_id)
            if ws is None:
                continue
            asyncio.ensure_future(self._safe_send(ws, msg))

    async def _safe_send(self, ws: ServerConnection, msg: WireMessage) -> None:
        try:
            await ws.send(encode_message(msg).decode("utf-8"))
        except ConnectionClosed:
            pass

    async def _poll_loop(self) -> None:
        while True:
            await asyncio.sleep(POLL_INTERVAL_S)
            try:
                self._dispatch(self.core.poll(time.time()))
            except Exception:
                log.exception("ws poll failed")

    async def _handle(self, ws: ServerConnection) -> None:
        conn_id = f"ws-{next(self._counter)}"
        self._conns[conn_id] = ws
        self.core.connect(conn_id)
        try:
            async for raw in ws:
                if isinstance(raw, str):
                    raw = raw.encode("utf-8")
                self._dispatch(self.core.handle_bytes(conn_id, raw, time.time()))
        except ConnectionClosed:
            pass
        finally:
            self._conns.pop(conn_id, None)
            self._dispatch(self.core.disconnect(conn_id, time.time()))
