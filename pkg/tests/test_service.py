import asyncio
import json
import urllib.request

import pytest
import websockets

from sketchmon.gateway.config import ServerConfig
from sketchmon.gateway.protocol import MessageType, WireMessage, encode_message, parse_message
from sketchmon.service import MonitorService, build_detector
from sketchmon.detector.runtime import OracleInkDetector, StubDetector


def run(coro):
    return asyncio.run(coro)


def service_config(tmp_path, **kw):
    defaults = dict(
        host="127.0.0.1",
        tcp_port=0,
        ws_port=0,
        metrics_port=0,
        relay_interval_ms=200,
        auto_confirm=True,
        detector="stub",
        render_workers=2,
        detect_workers=1,
        input_size=64,
        session_dir=str(tmp_path / "sessions"),
        time_limit_s=30.0,
    )
    defaults.update(kw)
    return ServerConfig(**defaults)


class WsClient:
    def __init__(self, port):
        self.port = port
        self.ws = None
        self.seq = 0

    async def connect(self):
        self.ws = await websockets.connect(f"ws://127.0.0.1:{self.port}/ws")
        return self

    async def send(self, mtype, session_id=None, **payload):
        msg = WireMessage(type=mtype, seq=self.seq, session_id=session_id, payload=payload)
        self.seq += 1
        await self.ws.send(encode_message(msg).decode())

    async def recv_until(self, mtype, timeout=5.0):
        loop = asyncio.get_event_loop()
        deadline = loop.time() + timeout
        while True:
            remaining = deadline - loop.time()
            if remaining <= 0:
                raise asyncio.TimeoutError(f"no {mtype}")
            raw = await asyncio.wait_for(self.ws.recv(), timeout=remaining)
            msg = parse_message(raw if isinstance(raw, bytes) else raw.encode())
            if msg.type is mtype:
                return msg

    async def close(self):
        await self.ws.close()


def test_config_load_env_overrides(tmp_path):
    cfg_path = tmp_path / "server.json"
    cfg_path.write_text(json.dumps({"tcp_port": 1234, "detector": "stub"}))
    cfg = ServerConfig.load(cfg_path, env={"SKETCHMON_TCP_PORT": "4321", "SKETCHMON_AUTO_CONFIRM": "true"})
    assert cfg.tcp_port == 4321  # env beats file
    assert cfg.detector == "stub"
    assert cfg.auto_confirm is True


def test_config_rejects_unknown_keys(tmp_path):
    cfg_path = tmp_path / "server.json"
    cfg_path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError):
        ServerConfig.load(cfg_path)


def test_build_detector_kinds(tmp_path):
    assert isinstance(build_detector(ServerConfig(detector="oracle")), OracleInkDetector)
    assert isinstance(build_detector(ServerConfig(detector="stub")), StubDetector)
    with pytest.raises(ValueError):
        build_detector(ServerConfig(detector="net"))
    with pytest.raises(ValueError):
        build_detector(ServerConfig(detector="wat"))


def test_ws_transport_full_game(tmp_path):
    async def scenario():
        service = MonitorService(service_config(tmp_path))
        await service.start()
        try:
            a = await WsClient(service.ws.port).connect()
            b = await WsClient(service.ws.port).connect()
            await a.send(MessageType.JOIN, v=1)
            await b.send(MessageType.JOIN, v=1)
            ra = await a.recv_until(MessageType.ROLE_ASSIGN)
            rb = await b.recv_until(MessageType.ROLE_ASSIGN)
            roles = {ra.payload["role"]: (a, ra), rb.payload["role"]: (b, rb)}
            drawer, dmsg = roles["drawer"]
            guesser, _ = roles["guesser"]
            sid = dmsg.session_id
            await drawer.send(
                MessageType.STROKE_ADD,
                sid,
                id=0,
                kind="draw",
                t_ms=0,
                pts=[[5, 5], [30, 5]],
            )
            echo = await guesser.recv_until(MessageType.STROKE_ADD)
            assert echo.payload["id"] == 0
            await guesser.send(MessageType.GUESS, sid, text=dmsg.payload["target"])
            end = await drawer.recv_until(MessageType.GAME_END)
            assert end.payload["state"] == "won_by_guess"
            await a.close()
            await b.close()
        finally:
            await service.stop()

    run(scenario())


def test_ws_serves_static_bundle(tmp_path):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>drawing portal</html>")

    async def scenario():
        service = MonitorService(service_config(tmp_path, static_dir=str(static)))
        await service.start()
        port = service.ws.port
        try:
            def fetch(path):
                return urllib.request.urlopen(f"http://127.0.0.1:{port}{path}", timeout=5)

            body = await asyncio.to_thread(lambda: fetch("/").read().decode())
            assert "drawing portal" in body
            with pytest.raises(Exception):
                await asyncio.to_thread(lambda: fetch("/../secret"))
        finally:
            await service.stop()

    run(scenario())


def test_metrics_endpoint_live(tmp_path):
    async def scenario():
        service = MonitorService(service_config(tmp_path))
        await service.start()
        try:
            port = service.metrics_server.port
            body = await asyncio.to_thread(
                lambda: urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/metrics", timeout=5
                ).read().decode()
            )
            assert "p_time_ms" in body
        finally:
            await service.stop()

    run(scenario())
