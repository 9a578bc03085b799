"""Pipeline throughput accounting and its plain-text HTTP exposure.

p_time is the running average of submit-to-completion latency per item
(completion = alert raised, or detection finished when nothing alerts);
n_sess tracks the highest concurrent active session count observed. The
effective throughput measure is tpr = p_time / n_sess, whose reciprocal is
an items-per-second rate.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

log = logging.getLogger(__name__)
event_log = logging.getLogger("sketchmon.pipeline.events")

_BUCKETS_MS = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, float("inf"))


class LatencyHistogram:
    def __init__(self):
        self.counts = [0] * len(_BUCKETS_MS)
        self.total_ms = 0.0
        self.count = 0

    def observe(self, ms: float) -> None:
        for i, edge in enumerate(_BUCKETS_MS):
            if ms <= edge:
                self.counts[i] += 1
                break
        self.total_ms += ms
        self.count += 1

    @property
    def mean_ms(self) -> float:
        return self.total_ms / self.count if self.count else 0.0

    def to_obj(self) -> dict:
        return {
            "count": self.count,
            "mean_ms": self.mean_ms,
            "buckets": {f"le_{e}": c for e, c in zip(_BUCKETS_MS, self.counts)},
        }


@dataclass(frozen=True)
class ThroughputStats:
    p_time_s: float
    n_sess: int
    tpr: float
    items_per_s: float


class PipelineMetrics:
    """Serialized collector shared by all pipeline stages."""

    def __init__(self):
        self._lock = threading.Lock()
        self.item_latency = LatencyHistogram()  # submit -> completion
        self.stage_latency: dict[str, LatencyHistogram] = {}
        self.gauges: dict[str, float] = {}
        self.n_sess = 0
        self.completed = 0
        self.errors = 0

    def observe_item(self, p_time_ms: float) -> None:
        with self._lock:
            self.item_latency.observe(p_time_ms)
            self.completed += 1

    def observe_stage(self, stage: str, ms: float) -> None:
        with self._lock:
            self.stage_latency.setdefault(stage, LatencyHistogram()).observe(ms)

    def observe_error(self) -> None:
        with self._lock:
            self.errors += 1

    def set_gauge(self, name: str, value: float) -> None:
        with self._lock:
            self.gauges[name] = value

    def update_active_sessions(self, count: int) -> None:
        with self._lock:
            self.n_sess = max(self.n_sess, count)

    @property
    def p_time_ms(self) -> float:
        with self._lock:
            return self.item_latency.mean_ms

    def log_event(self, kind: str, **fields) -> None:
        event_log.info(json.dumps({"event": kind, **fields}, separators=(",", ":")))

    def render_text(self) -> str:
        """One `key value` line per metric."""
        with self._lock:
            lines = [
                f"p_time_ms {self.item_latency.mean_ms:.3f}",
                f"n_sess {self.n_sess}",
                f"items_completed {self.completed}",
                f"items_errored {self.errors}",
            ]
            if self.completed and self.n_sess:
                tpr = self.item_latency.mean_ms / 1000.0 / self.n_sess
                lines.append(f"tpr {tpr:.6f}")
                if tpr > 0:
                    lines.append(f"items_per_s {1.0 / tpr:.3f}")
            for stage, hist in sorted(self.stage_latency.items()):
                lines.append(f"stage_{stage}_mean_ms {hist.mean_ms:.3f}")
                lines.append(f"stage_{stage}_count {hist.count}")
            for name, value in sorted(self.gauges.items()):
                lines.append(f"{name} {value:g}")
        return "\n".join(lines) + "\n"


def compute_tpr(metrics: PipelineMetrics) -> ThroughputStats:
    """tpr = p_time / n_sess; needs at least one completed item."""
    if metrics.completed == 0:
        raise ValueError("no completed items yet")
    if metrics.n_sess < 1:
        raise ValueError("no active sessions observed")
    p_time_s = metrics.p_time_ms / 1000.0
    tpr = p_time_s / metrics.n_sess
    rate = 1.0 / tpr if tpr > 0 else float("inf")
    return ThroughputStats(p_time_s=p_time_s, n_sess=metrics.n_sess, tpr=tpr, items_per_s=rate)


class _MetricsHandler(BaseHTTPRequestHandler):
    metrics: PipelineMetrics = None  # set by server factory
    routes: dict = {}  # extra path -> () -> (content_type, text)

    def do_GET(self):  # noqa: N802 (stdlib naming)
        if self.path in self.routes:
            ctype, text = self.routes[self.path]()
            body = text.encode("utf-8")
        elif self.path in ("/", "/metrics"):
            ctype = "text/plain; charset=utf-8"
            body = self.metrics.render_text().encode("utf-8")
        else:
            self.send_response(404)
            self.end_headers()
            return
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class MetricsServer:
    """Serves the plain-text dump (plus registered JSON routes) locally."""

    def __init__(
        self,
        metrics: PipelineMetrics,
        host: str = "127.0.0.1",
        port: int = 0,
        routes: dict | None = None,
    ):
        handler = type(
            "Handler", (_MetricsHandler,), {"metrics": metrics, "routes": routes or {}}
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> "MetricsServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)
