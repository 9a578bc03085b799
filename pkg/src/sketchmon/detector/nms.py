"""Prediction decoding and greedy non-maximum suppression."""

from __future__ import annotations

import numpy as np

from sketchmon.detector.boxes import clip_to_canvas, decode_offsets, pairwise_iou
from sketchmon.detector.types import (
    BACKGROUND_INDEX,
    DetectionBox,
    category_from_index,
)


def nms_keep(boxes: np.ndarray, scores: np.ndarray, nms_iou: float) -> list[int]:
    """Greedy suppression over one class.

    Candidates are visited by descending score, lower index first on ties;
    a candidate is kept unless it overlaps an already-kept box with
    IoU > nms_iou. Returns kept indices in visit order.
    """
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    for i in order:
        if all(pairwise_iou(boxes[i : i + 1], boxes[k : k + 1])[0, 0] <= nms_iou for k in kept):
            kept.append(i)
    return kept


def decode_and_nms(
    class_probs: np.ndarray,
    offsets: np.ndarray,
    anchor_boxes: np.ndarray,
    score_thresh: float = 0.5,
    nms_iou: float = 0.45,
    canvas_width: float = 512.0,
    canvas_height: float = 512.0,
) -> list[DetectionBox]:
    """Turn raw per-anchor predictions into final detection boxes.

    Anchors whose best non-background probability reaches score_thresh are
    decoded against their anchor, clipped to the canvas, and filtered by
    per-class greedy NMS.
    """
    if not (0.0 < score_thresh < 1.0) or not (0.0 < nms_iou < 1.0):
        raise ValueError("thresholds must lie in (0, 1)")
    probs = np.asarray(class_probs, dtype=np.float64)
    fg = np.delete(probs, BACKGROUND_INDEX, axis=1)
    conf = fg.max(axis=1)
    cls = fg.argmax(axis=1)

    candidates: dict[int, list[tuple[int, np.ndarray, float]]] = {}
    keep_anchor = np.nonzero(conf >= score_thresh)[0]
    decoded = decode_offsets(
        np.asarray(offsets, dtype=np.float64)[keep_anchor],
        np.asarray(anchor_boxes, dtype=np.float64)[keep_anchor],
    )
    for row, a_idx in enumerate(keep_anchor):
        clipped = clip_to_canvas(decoded[row], canvas_width, canvas_height)
        if clipped is None:
            continue
        candidates.setdefault(int(cls[a_idx]), []).append(
            (int(a_idx), clipped, float(conf[a_idx]))
        )

    results: list[tuple[float, int, DetectionBox]] = []
    for cls_idx, cand in candidates.items():
        boxes = np.stack([c[1] for c in cand])
        scores = np.array([c[2] for c in cand])
        # ties resolved by anchor index: candidates are appended in
        # ascending anchor order, so positional ties are anchor ties
        for i in nms_keep(boxes, scores, nms_iou):
            a_idx, box, score = cand[i]
            cx, cy, w, h = box
            results.append(
                (
                    score,
                    a_idx,
                    DetectionBox(cx, cy, w, h, category_from_index(cls_idx), score),
                )
            )
    results.sort(key=lambda t: (-t[0], t[1]))
    return [r[2] for r in results]
