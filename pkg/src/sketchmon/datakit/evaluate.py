"""Detection scoring: per-category AP/AR at a fixed IoU threshold.

Predictions match greedily (confidence order, order-independent tie-break)
to unmatched ground truths of the same image and category. AP integrates
the full precision-recall curve (all-point interpolation, 11-point
available); AR is recall with at most `max_dets` detections per image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sketchmon.detector.boxes import iou
from sketchmon.detector.types import Category, DetectionBox


@dataclass(frozen=True)
class CategoryScore:
    ap: float
    ar: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    per_category: dict[Category, CategoryScore]
    mean_ap: float
    mean_ar: float
    iou_thresh: float

    def to_obj(self) -> dict:
        return {
            "iou_thresh": self.iou_thresh,
            "mAP": self.mean_ap,
            "mAR": self.mean_ar,
            "categories": {
                cat.value: {"AP": s.ap, "AR": s.ar, "tp": s.tp, "fp": s.fp, "fn": s.fn}
                for cat, s in self.per_category.items()
            },
        }

    def format_table(self) -> str:
        lines = [f"{'category':<10} {'AP':>7} {'AR':>7} {'TP':>5} {'FP':>5} {'FN':>5}"]
        for cat, s in self.per_category.items():
            lines.append(
                f"{cat.value:<10} {s.ap:>7.4f} {s.ar:>7.4f} {s.tp:>5} {s.fp:>5} {s.fn:>5}"
            )
        lines.append(f"{'mean':<10} {self.mean_ap:>7.4f} {self.mean_ar:>7.4f}")
        return "\n".join(lines)


def _pred_sort_key(item: tuple[str, DetectionBox]):
    image_id, box = item
    return (-box.confidence, image_id, box.cx, box.cy, box.w, box.h)


def _greedy_match(
    ordered: Sequence[tuple[str, DetectionBox]],
    gt_by_image: Mapping[str, list[DetectionBox]],
    iou_thresh: float,
) -> list[bool]:
    taken: dict[str, set[int]] = {}
    flags = []
    for image_id, box in ordered:
        gts = gt_by_image.get(image_id, [])
        used = taken.setdefault(image_id, set())
        best, best_iou = -1, 0.0
        for g, gt in enumerate(gts):
            if g in used:
                continue
            v = iou((box.cx, box.cy, box.w, box.h), (gt.cx, gt.cy, gt.w, gt.h))
            if v > best_iou:
                best, best_iou = g, v
        if best >= 0 and best_iou >= iou_thresh:
            used.add(best)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _average_precision(tp_flags: Sequence[bool], n_gt: int, interpolation: str) -> float:
    if n_gt == 0:
        return 0.0
    tp_cum = np.cumsum(np.asarray(tp_flags, dtype=np.int64))
    fp_cum = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    precisions = tp_cum / (tp_cum + fp_cum)
    if interpolation == "11pt":
        recalls = tp_cum / n_gt
        total = 0.0
        for r in np.linspace(0, 1, 11):
            mask = recalls >= r
            total += precisions[mask].max() if mask.any() else 0.0
        return float(total / 11)
    # all-point: sum over steps of (delta tp) * interpolated precision; the
    # integer tp deltas keep the perfect-prediction case exactly 1.0
    interp = np.maximum.accumulate(precisions[::-1])[::-1]
    prev = 0
    area = 0.0
    for k in range(len(tp_flags)):
        step = int(tp_cum[k]) - prev
        if step:
            area += step * interp[k]
            prev = int(tp_cum[k])
    return float(area / n_gt)


def evaluate(
    predictions: Mapping[str, Sequence[DetectionBox]],
    ground_truths: Mapping[str, Sequence[DetectionBox]],
    iou_thresh: float = 0.5,
    max_dets: int = 100,
    interpolation: str = "all",
) -> EvalReport:
    if interpolation not in ("all", "11pt"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    categories = sorted(
        {b.category for boxes in ground_truths.values() for b in boxes},
        key=lambda c: c.index,
    )

    # per-image confidence cap for the recall measure
    capped: dict[str, list[DetectionBox]] = {}
    for image_id, boxes in predictions.items():
        ranked = sorted(boxes, key=lambda b: (-b.confidence, b.cx, b.cy, b.w, b.h))
        capped[image_id] = ranked[:max_dets]

    per_category: dict[Category, CategoryScore] = {}
    for cat in categories:
        gt_by_image = {
            img: [b for b in boxes if b.category is cat]
            for img, boxes in ground_truths.items()
        }
        n_gt = sum(len(v) for v in gt_by_image.values())

        ordered = sorted(
            (
                (img, b)
                for img, boxes in predictions.items()
                for b in boxes
                if b.category is cat
            ),
            key=_pred_sort_key,
        )
        flags = _greedy_match(ordered, gt_by_image, iou_thresh)
        ap = _average_precision(flags, n_gt, interpolation)
        tp = int(sum(flags))

        capped_ordered = sorted(
            ((img, b) for img, boxes in capped.items() for b in boxes if b.category is cat),
            key=_pred_sort_key,
        )
        capped_tp = sum(_greedy_match(capped_ordered, gt_by_image, iou_thresh))
        ar = capped_tp / n_gt if n_gt else 0.0

        per_category[cat] = CategoryScore(
            ap=ap, ar=float(ar), tp=tp, fp=len(flags) - tp, fn=n_gt - tp
        )

    if per_category:
        mean_ap = float(np.mean([s.ap for s in per_category.values()]))
        mean_ar = float(np.mean([s.ar for s in per_category.values()]))
    else:
        mean_ap = mean_ar = 0.0
    return EvalReport(per_category, mean_ap, mean_ar, iou_thresh)
