"""Raw TCP transport: 4-byte length-prefixed JSON frames, asyncio based."""

from __future__ import annotations

import asyncio
import itertools
import logging
import time
from typing import Optional

from sketchmon.gateway.core import GatewayCore
from sketchmon.gateway.protocol import (
    FrameDecoder,
    ProtocolError,
    WireMessage,
    encode_frame,
    parse_message,
)

log = logging.getLogger(__name__)

POLL_INTERVAL_S = 0.05


class TcpGateway:
    def __init__(self, core: GatewayCore, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        self.host = host
        self.port = port
        self._server: Optional[asyncio.AbstractServer] = None
        self._writers: dict[str, asyncio.StreamWriter] = {}
        self._conn_counter = itertools.count()
        self._poll_task: Optional[asyncio.Task] = None

    async def start(self) -> "TcpGateway":
        self._server = await asyncio.start_server(self._handle_conn, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._poll_task = asyncio.ensure_future(self._poll_loop())
        return self

    async def stop(self) -> None:
        if self._poll_task:
            self._poll_task.cancel()
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        for writer in list(self._writers.values()):
            writer.close()

    def send(self, conn_id: str, msg: WireMessage) -> None:
        writer = self._writers.get(conn_id)
        if writer is None or writer.is_closing():
            return
        writer.write(encode_frame(msg))

    def _dispatch(self, outbound) -> None:
        for conn_id, msg in outbound:
            self.send(conn_id, msg)

    async def _poll_loop(self) -> None:
        while True:
            await asyncio.sleep(POLL_INTERVAL_S)
            try:
                self._dispatch(self.core.poll(time.time()))
            except Exception:
                log.exception("gateway poll failed")

    async def _handle_conn(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn_id = f"tcp-{next(self._conn_counter)}"
        self._writers[conn_id] = writer
        self.core.connect(conn_id)
        decoder = FrameDecoder()
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                try:
                    frames = decoder.feed(data)
                except ProtocolError:
                    break  # unframeable stream; drop the connection
                for frame in frames:
                    self._dispatch(self.core.handle_bytes(conn_id, frame, time.time()))
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self._writers.pop(conn_id, None)
            self._dispatch(self.core.disconnect(conn_id, time.time()))
            writer.close()


class TcpTestClient:
    """Protocol-speaking client for tests and scripting."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self.reader: Optional[asyncio.StreamReader] = None
        self.writer: Optional[asyncio.StreamWriter] = None
        self._decoder = FrameDecoder()
        self._frames: list[bytes] = []
        self._seq = itertools.count()

    async def connect(self) -> "TcpTestClient":
        self.reader, self.writer = await asyncio.open_connection(self.host, self.port)
        return self

    async def close(self) -> None:
        if self.writer:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    def next_seq(self) -> int:
        return next(self._seq)

    async def send(self, msg: WireMessage) -> None:
        assert self.writer is not None
        self.writer.write(encode_frame(msg))
        await self.writer.drain()

    async def send_raw(self, data: bytes) -> None:
        assert self.writer is not None
        self.writer.write(data)
        await self.writer.drain()

    async def recv(self, timeout: float = 5.0) -> WireMessage:
        assert self.reader is not None
        deadline = asyncio.get_event_loop().time() + timeout
        while not self._frames:
            remaining = deadline - asyncio.get_event_loop().time()
            if remaining <= 0:
                raise asyncio.TimeoutError("no frame within timeout")
            data = await asyncio.wait_for(self.reader.read(4096), timeout=remaining)
            if not data:
                raise ConnectionError("server closed the connection")
            self._frames.extend(self._decoder.feed(data))
        return parse_message(self._frames.pop(0))

    async def recv_until(self, mtype, timeout: float = 5.0) -> WireMessage:
        deadline = asyncio.get_event_loop().time() + timeout
        while True:
            remaining = deadline - asyncio.get_event_loop().time()
            if remaining <= 0:
                raise asyncio.TimeoutError(f"no {mtype} within timeout")
            msg = await self.recv(timeout=remaining)
            if msg.type is mtype:
                return msg
