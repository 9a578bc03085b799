"""Training loop: Adam over the combined loss, with two batch regimes.

Text-only runs mine borderline false positives between epochs and feed
them back as extra hard background examples; multiclass runs resample
images so every category is drawn equally often per epoch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from sketchmon.detector.anchors import generate_anchors
from sketchmon.detector.boxes import decode_offsets, pairwise_iou
from sketchmon.detector.losses import focal_terms, total_loss
from sketchmon.detector.matching import MatchResult, match_anchors
from sketchmon.detector.net import DetectorNet, canvas_to_tensor
from sketchmon.detector.types import (
    BACKGROUND_INDEX,
    DetectionBox,
    NetConfig,
    TrainConfig,
    TrainMode,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainExample:
    image_id: str
    image: np.ndarray  # (S, S) binary
    boxes: tuple[DetectionBox, ...]


@dataclass
class TrainResult:
    net: DetectorNet
    loss_log: list[float]
    mined_per_epoch: list[int] = field(default_factory=list)


def balanced_weights(examples: Sequence[TrainExample]) -> np.ndarray:
    """Sampling weights equalizing expected per-category draws per epoch.

    Every image is weighted by the summed inverse frequency of the
    categories it contains; images without boxes form their own group.
    """
    cats_per_image = [
        frozenset(b.category for b in ex.boxes) or frozenset({None}) for ex in examples
    ]
    counts: dict = {}
    for cats in cats_per_image:
        for c in cats:
            counts[c] = counts.get(c, 0) + 1
    weights = np.array(
        [sum(1.0 / counts[c] for c in cats) for cats in cats_per_image], dtype=np.float64
    )
    return weights / weights.sum()


def _epoch_order(
    cfg: TrainConfig, n: int, weights: np.ndarray | None, rng: np.random.Generator
) -> np.ndarray:
    if cfg.mode is TrainMode.MULTICLASS:
        return rng.choice(n, size=n, replace=True, p=weights)
    return rng.permutation(n)


def mine_hard_negatives(
    probs: np.ndarray,
    offsets: np.ndarray,
    anchor_boxes: np.ndarray,
    gt_boxes: Sequence[DetectionBox],
    score_thresh: float,
    iou_band: tuple[float, float],
    match_thresh: float = 0.5,
) -> list[int]:
    """Anchor indices of confident false positives in the IoU band.

    Confident anchors are greedily matched to ground truth (confidence
    order); unmatched ones whose best ground-truth IoU falls inside the
    band come back as hard background examples.
    """
    fg = np.delete(probs, BACKGROUND_INDEX, axis=1)
    conf = fg.max(axis=1)
    cand = np.nonzero(conf >= score_thresh)[0]
    if cand.size == 0:
        return []
    decoded = decode_offsets(offsets[cand], anchor_boxes[cand])
    if len(gt_boxes) == 0:
        return []
    gt_arr = np.array([[b.cx, b.cy, b.w, b.h] for b in gt_boxes])
    ious = pairwise_iou(decoded, gt_arr)  # (n_cand, n_gt)

    order = np.argsort(-conf[cand], kind="stable")
    taken: set[int] = set()
    mined = []
    for row in order:
        best_g = int(ious[row].argmax())
        best_iou = float(ious[row, best_g])
        if best_iou >= match_thresh and best_g not in taken:
            taken.add(best_g)  # true positive, not mined
            continue
        if iou_band[0] <= best_iou <= iou_band[1]:
            mined.append(int(cand[row]))
    return mined


def train(
    examples: Sequence[TrainExample],
    net_cfg: NetConfig,
    cfg: TrainConfig,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Fit a fresh network on the examples; returns it with the loss log.

    Raises RuntimeError the moment the loss stops being finite.
    """
    if not examples:
        raise ValueError("training needs at least one example")
    if not any(ex.boxes for ex in examples):
        raise ValueError("training needs ground-truth boxes")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    net = DetectorNet(net_cfg)
    log.info("training %s parameters on %d examples", net.parameter_count(), len(examples))
    anchors = generate_anchors(net_cfg)
    targets: list[MatchResult] = [
        match_anchors(anchors.boxes, list(ex.boxes), cfg.loss) for ex in examples
    ]
    tensors = torch.cat(
        [canvas_to_tensor(ex.image.astype(np.float32)) for ex in examples], dim=0
    )
    weights = balanced_weights(examples) if cfg.mode is TrainMode.MULTICLASS else None
    opt = torch.optim.Adam(
        net.parameters(), lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2)
    )

    n = len(examples)
    n_anchors = len(anchors)
    mined: dict[int, list[int]] = {}
    loss_log: list[float] = []
    mined_log: list[int] = []
    for epoch in range(cfg.epochs):
        order = _epoch_order(cfg, n, weights, rng)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            logits, offsets = net(tensors[batch])
            probs = torch.softmax(logits, dim=-1)
            losses = []
            for k, idx in enumerate(batch):
                t = targets[idx]
                img_loss = total_loss(
                    probs[k], offsets[k], t.assignment, t.gt_offsets, anchors.boxes, cfg.loss
                )
                hard = mined.get(int(idx))
                if hard:
                    extra = focal_terms(
                        probs[k][hard],
                        torch.full((len(hard),), BACKGROUND_INDEX, dtype=torch.long),
                        cfg.loss.focal_gamma,
                        cfg.loss.focal_alpha,
                    ).sum()
                    img_loss = img_loss + cfg.loss.alpha * extra / n_anchors
                losses.append(img_loss)
            loss = torch.stack(losses).mean()
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(float(loss.detach()))

        if cfg.mode is TrainMode.TEXT_ONLY:
            mined = {}
            with torch.no_grad():
                logits, offsets = net(tensors)
                probs = torch.softmax(logits, dim=-1).numpy()
                offs = offsets.numpy()
            for idx, ex in enumerate(examples):
                hard = mine_hard_negatives(
                    probs[idx],
                    offs[idx],
                    anchors.boxes,
                    list(ex.boxes),
                    cfg.score_thresh,
                    cfg.loss.mining_band,
                    cfg.loss.match_iou_positive,
                )
                if hard:
                    mined[idx] = hard
        mined_log.append(sum(len(v) for v in mined.values()))

        mean_loss = float(np.mean(epoch_losses))
        loss_log.append(mean_loss)
        if on_epoch:
            on_epoch(epoch, mean_loss)
    return TrainResult(net=net, loss_log=loss_log, mined_per_epoch=mined_log)
