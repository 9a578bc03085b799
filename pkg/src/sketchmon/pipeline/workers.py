"""Render and detect worker stages around the hand-off queues."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from sketchmon.detector.runtime import Detector
from sketchmon.detector.types import DetectionBox
from sketchmon.pipeline.metrics import PipelineMetrics
from sketchmon.pipeline.queues import POISON, WorkQueue
from sketchmon.strokes import CanvasSnapshot, RenderConfig, RenderedCanvas, rasterize

log = logging.getLogger(__name__)

DEFAULT_CANVAS_QUEUE_CAPACITY = 256
DEFAULT_RENDERED_QUEUE_CAPACITY = 64
DEFAULT_RENDER_WORKERS = 16
DEFAULT_DETECT_WORKERS = 4


@dataclass
class PipelineItem:
    """Envelope carrying one canvas through the stages."""

    payload: CanvasSnapshot | RenderedCanvas
    ingress_ts: float

    @property
    def session_id(self) -> str:
        return self.payload.session_id

    @property
    def snapshot_seq(self) -> int:
        return self.payload.snapshot_seq


@dataclass(frozen=True)
class DetectionResult:
    session_id: str
    snapshot_seq: int
    boxes: tuple[DetectionBox, ...]
    detector_id: str
    detect_ms: float
    error: Optional[str] = None


def render_worker_step(
    queue_in: WorkQueue, queue_out: WorkQueue, cfg: RenderConfig, metrics: PipelineMetrics | None = None
) -> bool:
    """Process one snapshot; returns False on the shutdown pill."""
    item = queue_in.get()
    if item is POISON:
        return False
    start = time.monotonic()
    canvas = rasterize(item.payload, cfg)
    if metrics:
        metrics.observe_stage("render", (time.monotonic() - start) * 1000.0)
    queue_out.put(PipelineItem(payload=canvas, ingress_ts=item.ingress_ts))
    return True


def detect_worker_step(
    queue_in: WorkQueue,
    detector: Detector,
    sink: Callable[[DetectionResult, PipelineItem], None],
    metrics: PipelineMetrics | None = None,
) -> bool:
    """Run the detector on one rendered canvas and forward the result.

    Detector failures are forwarded as error-flagged results; the worker
    never dies with its item.
    """
    item = queue_in.get()
    if item is POISON:
        return False
    start = time.monotonic()
    error = None
    boxes: Sequence[DetectionBox] = ()
    try:
        boxes = detector.detect(item.payload)
    except Exception as exc:  # fault isolation: any detector error is data
        error = f"{type(exc).__name__}: {exc}"
    detect_ms = (time.monotonic() - start) * 1000.0
    if metrics:
        metrics.observe_stage("detect", detect_ms)
        if error:
            metrics.observe_error()
    result = DetectionResult(
        session_id=item.session_id,
        snapshot_seq=item.snapshot_seq,
        boxes=tuple(boxes),
        detector_id=detector.detector_id,
        detect_ms=detect_ms,
        error=error,
    )
    sink(result, item)
    return True


class WorkerPool:
    def __init__(self, name: str, size: int, step: Callable[[], bool]):
        self.name = name
        self._threads = [
            threading.Thread(target=self._run, name=f"{name}-{i}", daemon=True)
            for i in range(size)
        ]
        self._step = step

    def _run(self) -> None:
        while True:
            try:
                if not self._step():
                    return
            except Exception:
                # keep the pool alive; the failed item was already accounted
                log.exception("%s worker step failed", self.name)

    def start(self) -> None:
        for t in self._threads:
            t.start()

    def join(self, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        for t in self._threads:
            t.join(max(0.0, deadline - time.monotonic()))

    def __len__(self) -> int:
        return len(self._threads)


class Pipeline:
    """Canvas queue -> render pool -> rendered queue -> detect pool -> sink."""

    def __init__(
        self,
        detector: Detector,
        sink: Callable[[DetectionResult], None],
        render_cfg: RenderConfig = RenderConfig(),
        render_workers: int = DEFAULT_RENDER_WORKERS,
        detect_workers: int = DEFAULT_DETECT_WORKERS,
        canvas_capacity: int = DEFAULT_CANVAS_QUEUE_CAPACITY,
        rendered_capacity: int = DEFAULT_RENDERED_QUEUE_CAPACITY,
        metrics: PipelineMetrics | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.metrics = metrics or PipelineMetrics()
        self.clock = clock
        self._sink = sink
        self.canvas_queue: WorkQueue = WorkQueue(
            canvas_capacity, supersede_key=lambda it: it.session_id, name="canvas"
        )
        self.rendered_queue: WorkQueue = WorkQueue(
            rendered_capacity, supersede_key=lambda it: it.session_id, name="rendered"
        )
        self.render_pool = WorkerPool(
            "render",
            render_workers,
            lambda: render_worker_step(
                self.canvas_queue, self.rendered_queue, render_cfg, self.metrics
            ),
        )
        self.detect_pool = WorkerPool(
            "detect",
            detect_workers,
            lambda: detect_worker_step(
                self.rendered_queue, detector, self._complete, self.metrics
            ),
        )

    def submit(self, snapshot: CanvasSnapshot) -> None:
        """Enqueue the latest canvas of a session; stale pending snapshots of
        the same session are superseded."""
        item = PipelineItem(payload=snapshot, ingress_ts=self.clock())
        self.canvas_queue.put(item)
        self.metrics.set_gauge("canvas_queue_depth", self.canvas_queue.depth())
        self.metrics.log_event(
            "submit", session=snapshot.session_id, seq=snapshot.snapshot_seq
        )

    def _complete(self, result: DetectionResult, item: PipelineItem) -> None:
        try:
            self._sink(result)
        except Exception:
            log.exception("pipeline sink failed for session %s", result.session_id)
        p_time_ms = (self.clock() - item.ingress_ts) * 1000.0
        self.metrics.observe_item(p_time_ms)
        self.metrics.set_gauge("rendered_queue_depth", self.rendered_queue.depth())
        self.metrics.log_event(
            "complete",
            session=result.session_id,
            seq=result.snapshot_seq,
            p_time_ms=round(p_time_ms, 3),
            boxes=len(result.boxes),
            error=result.error,
        )

    def start(self) -> "Pipeline":
        self.render_pool.start()
        self.detect_pool.start()
        return self

    def stop(self) -> None:
        for _ in range(len(self.render_pool)):
            self.canvas_queue.put(POISON)
        self.render_pool.join()
        for _ in range(len(self.detect_pool)):
            self.rendered_queue.put(POISON)
        self.detect_pool.join()

    def drain(self, timeout: float = 30.0) -> bool:
        """Wait until no item is queued or in flight; True when drained in time."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            canvas, rendered = self.canvas_queue.stats, self.rendered_queue.stats
            in_render = canvas.dequeued - rendered.enqueued
            in_detect = rendered.dequeued - self.metrics.completed
            if canvas.depth == 0 and rendered.depth == 0 and in_render == 0 and in_detect == 0:
                return True
            time.sleep(0.005)
        return False

    def queue_stats(self) -> dict:
        return {
            "canvas": self.canvas_queue.stats,
            "rendered": self.rendered_queue.stats,
        }
