"""The pluggable detection contract and its implementations."""

from __future__ import annotations

import hashlib
import time
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from sketchmon.strokes import RenderedCanvas
from sketchmon.detector.anchors import generate_anchors
from sketchmon.detector.net import DetectorNet, run_forward
from sketchmon.detector.nms import decode_and_nms
from sketchmon.detector.types import Category, DetectionBox


class DetectTimeout(Exception):
    """Detection exceeded its configured time budget."""


@runtime_checkable
class Detector(Protocol):
    detector_id: str

    def detect(self, canvas: RenderedCanvas) -> list[DetectionBox]: ...


def canvas_digest(pixels: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(pixels).tobytes()).hexdigest()


class NetDetector:
    """Runs the trained network on rendered canvases."""

    def __init__(
        self,
        net: DetectorNet,
        score_thresh: float = 0.5,
        nms_iou: float = 0.45,
        time_budget_ms: float | None = None,
        detector_id: str = "net",
    ):
        self.net = net.eval()
        self.anchors = generate_anchors(net.cfg)
        self.score_thresh = score_thresh
        self.nms_iou = nms_iou
        self.time_budget_ms = time_budget_ms
        self.detector_id = detector_id

    def detect(self, canvas: RenderedCanvas) -> list[DetectionBox]:
        start = time.monotonic()
        probs, offsets = run_forward(canvas, self.net)
        boxes = decode_and_nms(
            probs,
            offsets,
            self.anchors.boxes,
            score_thresh=self.score_thresh,
            nms_iou=self.nms_iou,
            canvas_width=self.net.cfg.input_size,
            canvas_height=self.net.cfg.input_size,
        )
        elapsed_ms = (time.monotonic() - start) * 1000.0
        if self.time_budget_ms is not None and elapsed_ms > self.time_budget_ms:
            raise DetectTimeout(f"detection took {elapsed_ms:.1f} ms > {self.time_budget_ms} ms")
        return boxes


class StubDetector:
    """Test double: fixed latency, optional canvas-hash triggered boxes,
    optional injected faults."""

    def __init__(
        self,
        latency_ms: float = 1.0,
        triggers: dict[str, Sequence[DetectionBox]] | None = None,
        fail_on: Callable[[int], bool] | None = None,
        detector_id: str = "stub",
    ):
        self.latency_ms = latency_ms
        self.triggers = dict(triggers or {})
        self.fail_on = fail_on
        self.calls = 0
        self.detector_id = detector_id

    def add_trigger(self, canvas: RenderedCanvas, boxes: Sequence[DetectionBox]) -> None:
        self.triggers[canvas_digest(canvas.pixels)] = list(boxes)

    def detect(self, canvas: RenderedCanvas) -> list[DetectionBox]:
        self.calls += 1
        if self.fail_on is not None and self.fail_on(self.calls):
            raise RuntimeError("injected detector fault")
        if self.latency_ms > 0:
            time.sleep(self.latency_ms / 1000.0)
        return list(self.triggers.get(canvas_digest(canvas.pixels), []))


class OracleInkDetector:
    """Geometric test detector: reports the bounding box of all ink as text.

    Blank canvases yield nothing; the confidence is always 1.
    """

    def __init__(self, category: Category = Category.TEXT, detector_id: str = "oracle"):
        self.category = category
        self.detector_id = detector_id

    def detect(self, canvas: RenderedCanvas) -> list[DetectionBox]:
        rows, cols = np.nonzero(canvas.pixels)
        if rows.size == 0:
            return []
        x0, x1 = cols.min(), cols.max() + 1.0
        y0, y1 = rows.min(), rows.max() + 1.0
        return [
            DetectionBox(
                cx=(x0 + x1) / 2,
                cy=(y0 + y1) / 2,
                w=float(x1 - x0),
                h=float(y1 - y0),
                category=self.category,
                confidence=1.0,
            )
        ]
