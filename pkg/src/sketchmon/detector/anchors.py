"""Anchor grid generation.

Anchor order is the contract between this module and the network head:
scale-major, then cell row, cell col, then aspect ratio, then vertical
offset. The head flattens its output maps in exactly this order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sketchmon.detector.types import Anchor, NetConfig


@dataclass(frozen=True)
class AnchorSet:
    """All anchors of a config: array form for bulk math plus metadata."""

    boxes: np.ndarray  # (N, 4) center-form float64
    scale_index: np.ndarray  # (N,) int
    cell_row: np.ndarray  # (N,) int
    cell_col: np.ndarray  # (N,) int
    aspect_ratio: np.ndarray  # (N,) float
    vertical_offset: np.ndarray  # (N,) float

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def __getitem__(self, i: int) -> Anchor:
        cx, cy, w, h = self.boxes[i]
        return Anchor(
            cx=float(cx),
            cy=float(cy),
            w=float(w),
            h=float(h),
            scale_index=int(self.scale_index[i]),
            cell_row=int(self.cell_row[i]),
            cell_col=int(self.cell_col[i]),
            aspect_ratio=float(self.aspect_ratio[i]),
            vertical_offset=float(self.vertical_offset[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def generate_anchors(cfg: NetConfig) -> AnchorSet:
    """Deterministic anchor grid for every prediction scale.

    Per cell there is one anchor for each (aspect ratio, vertical offset)
    pair, centered at the cell center shifted vertically by +-0.25 cell
    heights. The base side is anchor_base_factor * stride; width and height
    realize the aspect ratio at equal area (w*h == base**2, w/h == ratio).
    """
    boxes, scales, rows, cols, ratios, offs = [], [], [], [], [], []
    for s in range(cfg.num_scales):
        stride = cfg.stride_for_scale(s)
        n = cfg.feature_size(s)
        base = cfg.anchor_base_factor * stride
        for row in range(n):
            cy0 = (row + 0.5) * stride
            for col in range(n):
                cx = (col + 0.5) * stride
                for ratio in cfg.aspect_ratios:
                    w = base * math.sqrt(ratio)
                    h = base / math.sqrt(ratio)
                    for off in cfg.vertical_offsets:
                        boxes.append((cx, cy0 + off * stride, w, h))
                        scales.append(s)
                        rows.append(row)
                        cols.append(col)
                        ratios.append(ratio)
                        offs.append(off)
    return AnchorSet(
        boxes=np.asarray(boxes, dtype=np.float64),
        scale_index=np.asarray(scales, dtype=np.int64),
        cell_row=np.asarray(rows, dtype=np.int64),
        cell_col=np.asarray(cols, dtype=np.int64),
        aspect_ratio=np.asarray(ratios, dtype=np.float64),
        vertical_offset=np.asarray(offs, dtype=np.float64),
    )
