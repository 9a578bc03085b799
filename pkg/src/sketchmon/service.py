"""Full service assembly: gateway + monitoring pipeline + alert engine.

Wires player connections (TCP and WebSocket) into the game registry,
relays canvas snapshots through the render/detect worker pools, and routes
alerts back to the players that triggered them.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from sketchmon.alerts import AlertEngine, RuleBase
from sketchmon.detector.net import DetectorNet
from sketchmon.detector.runtime import Detector, NetDetector, OracleInkDetector, StubDetector
from sketchmon.detector.types import NetConfig
from sketchmon.detector.weights_io import load_weights
from sketchmon.gamecore import PhraseDictionary, SessionRegistry
from sketchmon.gateway.config import ServerConfig
from sketchmon.gateway.core import GatewayCore, RelayPolicy
from sketchmon.gateway.tcp import TcpGateway
from sketchmon.gateway.ws import WsGateway
from sketchmon.pipeline.metrics import MetricsServer, PipelineMetrics
from sketchmon.pipeline.workers import Pipeline
from sketchmon.strokes import RenderConfig

log = logging.getLogger(__name__)


def build_detector(config: ServerConfig) -> Detector:
    if config.detector == "oracle":
        return OracleInkDetector()
    if config.detector == "stub":
        return StubDetector(latency_ms=1.0)
    if config.detector == "net":
        if not config.model_path:
            raise ValueError("detector 'net' needs model_path")
        net_cfg = NetConfig() if config.input_size == 512 else NetConfig.toy()
        net = DetectorNet(net_cfg)
        load_weights(net, config.model_path)
        return NetDetector(net)
    raise ValueError(f"unknown detector kind {config.detector!r}")


class MonitorService:
    def __init__(self, config: ServerConfig | None = None, detector: Detector | None = None):
        self.config = config or ServerConfig()
        cfg = self.config
        self.metrics = PipelineMetrics()
        self.alerts = AlertEngine(rules=RuleBase.text_violations())
        self.detector = detector if detector is not None else build_detector(cfg)
        render_cfg = RenderConfig(width=cfg.input_size, height=cfg.input_size)
        self.pipeline = Pipeline(
            detector=self.detector,
            sink=self.alerts.ingest,
            render_cfg=render_cfg,
            render_workers=cfg.render_workers,
            detect_workers=cfg.detect_workers,
            metrics=self.metrics,
        )
        self.core = GatewayCore(
            registry=SessionRegistry(capacity=cfg.capacity),
            alert_engine=self.alerts,
            phrases=PhraseDictionary.default(),
            policy=RelayPolicy(min_interval_ms=cfg.relay_interval_ms),
            submit_snapshot=self.pipeline.submit,
            auto_confirm=cfg.auto_confirm,
            time_limit_s=cfg.time_limit_s,
            session_dir=cfg.session_dir or None,
            on_session_count=self.metrics.update_active_sessions,
        )
        self.tcp = TcpGateway(self.core, cfg.host, cfg.tcp_port)
        static = cfg.static_dir or None
        self.ws = WsGateway(self.core, cfg.host, cfg.ws_port, static_dir=static)
        self.metrics_server = MetricsServer(
            self.metrics,
            cfg.host,
            cfg.metrics_port,
            routes={
                "/ledger": lambda: (
                    "application/json",
                    json.dumps(self.alerts.ledger_dump()),
                )
            },
        )

    async def start(self) -> "MonitorService":
        self.pipeline.start()
        self.metrics_server.start()
        await self.tcp.start()
        await self.ws.start()
        log.info(
            "listening: tcp=%s ws=%s metrics=%s detector=%s",
            self.tcp.port,
            self.ws.port,
            self.metrics_server.port,
            self.detector.detector_id,
        )
        return self

    async def stop(self) -> None:
        await self.tcp.stop()
        await self.ws.stop()
        self.pipeline.stop()
        self.metrics_server.stop()

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()


def run_service(config: ServerConfig) -> None:
    asyncio.run(MonitorService(config).serve_forever())
