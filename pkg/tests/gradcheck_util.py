"""Finite-difference gradient verification shared by unit and acceptance tests."""

import numpy as np
import torch

from sketchmon.detector.anchors import generate_anchors
from sketchmon.detector.losses import total_loss
from sketchmon.detector.matching import match_anchors
from sketchmon.detector.net import DetectorNet, canvas_to_tensor
from sketchmon.detector.types import Category, DetectionBox, LossConfig, NetConfig


def build_loss_env(seed: int = 42):
    """Small network + fixed image + fixed targets, all in float64."""
    torch.manual_seed(seed)
    cfg = NetConfig.toy()
    net = DetectorNet(cfg).double()
    anchors = generate_anchors(cfg)
    rng = np.random.default_rng(seed)
    image = (rng.random((cfg.input_size, cfg.input_size)) < 0.15).astype(np.float64)
    gts = [
        DetectionBox(20.0, 24.0, 18.0, 10.0, Category.TEXT, 1.0),
        DetectionBox(44.0, 40.0, 13.0, 13.0, Category.CIRCLE, 1.0),
    ]
    match = match_anchors(anchors.boxes, gts)
    assert match.num_positive > 0
    x = canvas_to_tensor(image, torch.float64)
    loss_cfg = LossConfig()

    def loss_fn() -> torch.Tensor:
        logits, offsets = net(x)
        probs = torch.softmax(logits[0], dim=-1)
        return total_loss(
            probs, offsets[0], match.assignment, match.gt_offsets, anchors.boxes, loss_cfg
        )

    return net, loss_fn


def run_gradient_check(num_samples: int = 500, seed: int = 42):
    """Compare autograd gradients of the full loss against central differences.

    Returns (fraction_within_tolerance, relative_errors); samples are spread
    over every parameter tensor so each layer type is covered.
    """
    net, loss_fn = build_loss_env(seed)
    loss = loss_fn()
    net.zero_grad()
    loss.backward()

    params = [p for p in net.parameters() if p.requires_grad]
    sizes = np.array([p.numel() for p in params])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    flat_choice = rng.choice(total, size=min(num_samples, total), replace=False)
    bounds = np.cumsum(sizes)

    rel_errors = []
    with torch.no_grad():
        for flat in sorted(flat_choice):
            p_idx = int(np.searchsorted(bounds, flat, side="right"))
            offset = int(flat - (bounds[p_idx - 1] if p_idx else 0))
            param = params[p_idx]
            flat_param = param.view(-1)
            orig = float(flat_param[offset])
            h = 1e-5 * max(1.0, abs(orig))
            flat_param[offset] = orig + h
            lp = float(loss_fn())
            flat_param[offset] = orig - h
            lm = float(loss_fn())
            flat_param[offset] = orig
            numeric = (lp - lm) / (2 * h)
            analytic = float(param.grad.view(-1)[offset])
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            rel_errors.append(rel)

    rel_errors = np.array(rel_errors)
    return float(np.mean(rel_errors <= 1e-3)), rel_errors
