"""Box arithmetic on center-form (cx, cy, w, h) arrays.

All functions take and return numpy arrays shaped (..., 4) and broadcast;
plain sequences of four numbers are accepted for one-off calls.
"""

from __future__ import annotations

import numpy as np


def as_box_array(box) -> np.ndarray:
    arr = np.asarray(box, dtype=np.float64)
    if arr.shape[-1] != 4:
        raise ValueError(f"expected (..., 4) box array, got shape {arr.shape}")
    return arr


def center_to_corners(boxes) -> np.ndarray:
    b = as_box_array(boxes)
    half = b[..., 2:] / 2.0
    return np.concatenate([b[..., :2] - half, b[..., :2] + half], axis=-1)


def corners_to_center(corners) -> np.ndarray:
    c = np.asarray(corners, dtype=np.float64)
    wh = c[..., 2:] - c[..., :2]
    return np.concatenate([c[..., :2] + wh / 2.0, wh], axis=-1)


def iou(a, b) -> np.ndarray | float:
    """Intersection over union of center-form boxes; broadcasts.

    Degenerate pairs (zero union) score 0; disjoint boxes score 0.
    """
    ca, cb = center_to_corners(a), center_to_corners(b)
    ix0 = np.maximum(ca[..., 0], cb[..., 0])
    iy0 = np.maximum(ca[..., 1], cb[..., 1])
    ix1 = np.minimum(ca[..., 2], cb[..., 2])
    iy1 = np.minimum(ca[..., 3], cb[..., 3])
    inter = np.clip(ix1 - ix0, 0.0, None) * np.clip(iy1 - iy0, 0.0, None)
    area_a = np.clip(ca[..., 2] - ca[..., 0], 0.0, None) * np.clip(
        ca[..., 3] - ca[..., 1], 0.0, None
    )
    area_b = np.clip(cb[..., 2] - cb[..., 0], 0.0, None) * np.clip(
        cb[..., 3] - cb[..., 1], 0.0, None
    )
    union = area_a + area_b - inter
    out = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def pairwise_iou(a, b) -> np.ndarray:
    """IoU matrix of shape (len(a), len(b)) for center-form box lists."""
    a = as_box_array(a).reshape(-1, 4)
    b = as_box_array(b).reshape(-1, 4)
    return iou(a[:, None, :], b[None, :, :])


def encode_offsets(gt, anchors) -> np.ndarray:
    """Offsets of gt relative to anchors: (dx/aw, dy/ah, ln(gw/aw), ln(gh/ah))."""
    g, an = as_box_array(gt), as_box_array(anchors)
    return np.stack(
        [
            (g[..., 0] - an[..., 0]) / an[..., 2],
            (g[..., 1] - an[..., 1]) / an[..., 3],
            np.log(g[..., 2] / an[..., 2]),
            np.log(g[..., 3] / an[..., 3]),
        ],
        axis=-1,
    )


def decode_offsets(offsets, anchors) -> np.ndarray:
    """Inverse of encode_offsets; returns center-form boxes."""
    t, an = as_box_array(offsets), as_box_array(anchors)
    return np.stack(
        [
            an[..., 0] + t[..., 0] * an[..., 2],
            an[..., 1] + t[..., 1] * an[..., 3],
            an[..., 2] * np.exp(t[..., 2]),
            an[..., 3] * np.exp(t[..., 3]),
        ],
        axis=-1,
    )


def clip_to_canvas(box, width: float, height: float) -> np.ndarray | None:
    """Clip a center-form box to the canvas; None when nothing remains."""
    x0, y0, x1, y1 = center_to_corners(box)
    x0, y0 = max(0.0, x0), max(0.0, y0)
    x1, y1 = min(float(width), x1), min(float(height), y1)
    if x1 <= x0 or y1 <= y0:
        return None
    return corners_to_center(np.array([x0, y0, x1, y1]))
