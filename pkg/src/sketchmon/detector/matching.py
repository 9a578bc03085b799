"""Anchor-to-ground-truth assignment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sketchmon.detector.boxes import encode_offsets, pairwise_iou
from sketchmon.detector.types import (
    ATYPICAL_CATEGORIES,
    DetectionBox,
    LossConfig,
)


@dataclass(frozen=True)
class MatchResult:
    assignment: np.ndarray  # (N, c) one-hot over atypical categories
    gt_offsets: np.ndarray  # (N, 4); zeros on background rows
    matched_gt: np.ndarray  # (N,) gt index, -1 on background rows
    num_positive: int


def match_anchors(
    anchor_boxes: np.ndarray,
    gt_boxes: Sequence[DetectionBox],
    cfg: LossConfig = LossConfig(),
) -> MatchResult:
    """Assign anchors to ground-truth boxes.

    An anchor is positive for its best-IoU ground truth when that IoU
    reaches cfg.match_iou_positive. Each ground truth then claims its own
    single best-IoU anchor regardless of threshold (input order wins when
    two ground truths claim the same anchor). Everything else is background.
    Offset targets encode the ground-truth box relative to the anchor.
    """
    boxes = np.asarray(anchor_boxes, dtype=np.float64).reshape(-1, 4)
    n = boxes.shape[0]
    c = len(ATYPICAL_CATEGORIES)
    assignment = np.zeros((n, c), dtype=np.float64)
    offsets = np.zeros((n, 4), dtype=np.float64)
    matched = np.full(n, -1, dtype=np.int64)
    if len(gt_boxes) == 0:
        return MatchResult(assignment, offsets, matched, 0)

    gt_arr = np.array([[b.cx, b.cy, b.w, b.h] for b in gt_boxes], dtype=np.float64)
    ious = pairwise_iou(boxes, gt_arr)  # (n, n_gt)

    best_gt = ious.argmax(axis=1)
    best_iou = ious[np.arange(n), best_gt]
    positive = best_iou >= cfg.match_iou_positive
    matched[positive] = best_gt[positive]
    for g in range(gt_arr.shape[0]):
        matched[int(ious[:, g].argmax())] = g

    pos_idx = np.nonzero(matched >= 0)[0]
    for i in pos_idx:
        g = matched[i]
        assignment[i, gt_boxes[g].category.index] = 1.0
        offsets[i] = encode_offsets(gt_arr[g], boxes[i])
    return MatchResult(assignment, offsets, matched, len(pos_idx))
