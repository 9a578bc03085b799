"""Detection loss: focal classification plus distance-IoU localization.

The combined loss over one image is

    alpha * mean_i focal(P_i, target_i)  +  (1/M) * sum_{i positive} diou_i

where the focal mean runs over all N anchors (background included) and the
distance-IoU sum runs over the M anchors matched to a ground-truth box.
Everything here is written in torch so the same code path serves training,
the scalar contract functions, and the finite-difference gradient tests.
"""

from __future__ import annotations

import numpy as np
import torch

from sketchmon.detector.types import (
    BACKGROUND_INDEX,
    Category,
    LossConfig,
)

_PT_EPS = 1e-12


def _as_tensor(x, like: torch.Tensor | None = None) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    t = torch.as_tensor(np.asarray(x))
    if t.dtype not in (torch.float32, torch.float64):
        t = t.to(torch.float64)
    if like is not None:
        t = t.to(like.dtype)
    return t


def focal_terms(
    probs: torch.Tensor, target_idx: torch.Tensor, gamma: float, alpha: float
) -> torch.Tensor:
    """Per-anchor focal loss, probs (N, C) softmax rows, target_idx (N,)."""
    p_t = probs.gather(1, target_idx.view(-1, 1)).squeeze(1)
    p_t = p_t.clamp(min=_PT_EPS, max=1.0)
    return -alpha * (1.0 - p_t).pow(gamma) * torch.log(p_t)


def focal_loss(scores, target_class, gamma: float = 2.0, alpha: float = 0.25) -> float:
    """Focal loss of one softmax row against its target class."""
    probs = _as_tensor(scores).reshape(1, -1)
    idx = target_class.index if isinstance(target_class, Category) else int(target_class)
    t = torch.tensor([idx])
    return float(focal_terms(probs, t, gamma, alpha)[0])


def decode_offsets_t(offsets: torch.Tensor, anchors: torch.Tensor) -> torch.Tensor:
    """Differentiable twin of boxes.decode_offsets; center-form output."""
    cx = anchors[..., 0] + offsets[..., 0] * anchors[..., 2]
    cy = anchors[..., 1] + offsets[..., 1] * anchors[..., 3]
    w = anchors[..., 2] * torch.exp(offsets[..., 2])
    h = anchors[..., 3] * torch.exp(offsets[..., 3])
    return torch.stack([cx, cy, w, h], dim=-1)


def diou_terms(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Per-pair distance-IoU loss: 1 - IoU + |centers|^2 / diag^2.

    diag is the diagonal of the smallest box enclosing both inputs, so the
    penalty term is < 1 and the whole loss lies in [0, 2).
    """
    px0 = pred[..., 0] - pred[..., 2] / 2
    py0 = pred[..., 1] - pred[..., 3] / 2
    px1 = pred[..., 0] + pred[..., 2] / 2
    py1 = pred[..., 1] + pred[..., 3] / 2
    gx0 = gt[..., 0] - gt[..., 2] / 2
    gy0 = gt[..., 1] - gt[..., 3] / 2
    gx1 = gt[..., 0] + gt[..., 2] / 2
    gy1 = gt[..., 1] + gt[..., 3] / 2

    inter_w = (torch.minimum(px1, gx1) - torch.maximum(px0, gx0)).clamp(min=0)
    inter_h = (torch.minimum(py1, gy1) - torch.maximum(py0, gy0)).clamp(min=0)
    inter = inter_w * inter_h
    union = pred[..., 2] * pred[..., 3] + gt[..., 2] * gt[..., 3] - inter
    iou = inter / union.clamp(min=_PT_EPS)

    rho2 = (pred[..., 0] - gt[..., 0]) ** 2 + (pred[..., 1] - gt[..., 1]) ** 2
    enc_w = torch.maximum(px1, gx1) - torch.minimum(px0, gx0)
    enc_h = torch.maximum(py1, gy1) - torch.minimum(py0, gy0)
    c2 = (enc_w**2 + enc_h**2).clamp(min=_PT_EPS)
    return 1.0 - iou + rho2 / c2


def diou_loss(pred, gt) -> float:
    """Distance-IoU loss of a single center-form box pair."""
    p = _as_tensor(pred).reshape(-1)
    g = _as_tensor(gt).reshape(-1)
    return float(diou_terms(p, g))


def total_loss(
    class_probs,
    pred_offsets,
    gt_assignment,
    gt_offsets,
    anchor_boxes,
    cfg: LossConfig = LossConfig(),
) -> torch.Tensor:
    """Combined loss over one image's N anchors.

    class_probs: (N, C) softmax rows including the background column.
    pred_offsets / gt_offsets: (N, 4) box offsets relative to anchor_boxes.
    gt_assignment: (N, c) one-hot over the atypical categories; all-zero
    rows are background.  Localization decodes both offset sets against the
    anchors and is averaged over the M positive rows (zero when M == 0).
    """
    probs = _as_tensor(class_probs)
    pred_t = _as_tensor(pred_offsets, like=probs)
    g = _as_tensor(gt_assignment, like=probs)
    gt_t = _as_tensor(gt_offsets, like=probs)
    anchors_t = _as_tensor(anchor_boxes, like=probs)

    target_idx = torch.where(
        g.sum(dim=1) > 0,
        g.argmax(dim=1),
        torch.full((g.shape[0],), BACKGROUND_INDEX, dtype=torch.long),
    )
    cls = cfg.alpha * focal_terms(probs, target_idx, cfg.focal_gamma, cfg.focal_alpha).mean()

    pos = g.sum(dim=1) > 0
    m = int(pos.sum())
    if m == 0:
        return cls
    pred_boxes = decode_offsets_t(pred_t[pos], anchors_t[pos])
    gt_boxes = decode_offsets_t(gt_t[pos], anchors_t[pos])
    loc = diou_terms(pred_boxes, gt_boxes).sum() / m
    return cls + loc
