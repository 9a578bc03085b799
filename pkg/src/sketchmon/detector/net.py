"""Anchor-based detection network.

Stages: a separable-conv stem, three pool/dense-block/transition segments,
optional stride-2 downsampling blocks for the extra prediction scales, and
one prediction head per scale (3x5 separable conv followed by a shared
per-location linear projection). Head outputs flatten in the anchor order
defined by anchors.generate_anchors.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from sketchmon.strokes import RenderedCanvas
from sketchmon.detector.types import NetConfig


class SepConv2d(nn.Module):
    """Depthwise convolution followed by a 1x1 pointwise projection."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: tuple[int, int] = (3, 3),
        stride: int = 1,
    ):
        super().__init__()
        padding = (kernel[0] // 2, kernel[1] // 2)
        self.depthwise = nn.Conv2d(
            in_channels,
            in_channels,
            kernel,
            stride=stride,
            padding=padding,
            groups=in_channels,
        )
        self.pointwise = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pointwise(self.depthwise(x))


class DenseLayer(nn.Module):
    """1x1 separable bottleneck then 3x3 separable conv producing `growth`
    channels, concatenated onto the running feature stack."""

    def __init__(self, in_channels: int, growth: int, bottleneck: int):
        super().__init__()
        self.reduce = SepConv2d(in_channels, bottleneck, kernel=(1, 1))
        self.conv = SepConv2d(bottleneck, growth, kernel=(3, 3))
        self.act = nn.Mish()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.conv(self.act(self.reduce(x)))
        return torch.cat([x, self.act(out)], dim=1)


class FeatureSegment(nn.Module):
    """2x2 max pool -> dense block -> 1x1 separable transition halving channels."""

    def __init__(self, in_channels: int, cfg: NetConfig):
        super().__init__()
        self.pool = nn.MaxPool2d(2)
        layers = []
        ch = in_channels
        for _ in range(cfg.block_layers):
            layers.append(DenseLayer(ch, cfg.growth, cfg.bottleneck_factor * cfg.growth))
            ch += cfg.growth
        self.block = nn.Sequential(*layers)
        self.out_channels = ch // 2
        self.transition = SepConv2d(ch, self.out_channels, kernel=(1, 1))
        self.act = nn.Mish()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.transition(self.block(self.pool(x))))


class DownBlock(nn.Module):
    """1x1 separable reduction then 3x3 stride-2 separable conv."""

    def __init__(self, in_channels: int, mid: int, out: int):
        super().__init__()
        self.reduce = SepConv2d(in_channels, mid, kernel=(1, 1))
        self.down = SepConv2d(mid, out, kernel=(3, 3), stride=2)
        self.act = nn.Mish()
        self.out_channels = out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.down(self.act(self.reduce(x))))


class PredictionHead(nn.Module):
    """3x5 separable conv then a per-location linear projection emitting
    (classes + 4 offsets) for every anchor of the cell.

    A negative prior_bias on the foreground logits keeps the background sea
    quiet at init so the focal loss concentrates on matched anchors.
    """

    def __init__(
        self, in_channels: int, anchors_per_cell: int, num_classes: int, prior_bias: float
    ):
        super().__init__()
        self.features = SepConv2d(in_channels, in_channels, kernel=(3, 5))
        self.act = nn.Mish()
        self.num_values = num_classes + 4
        self.project = nn.Conv2d(in_channels, anchors_per_cell * self.num_values, 1)
        with torch.no_grad():
            bias = self.project.bias.view(anchors_per_cell, self.num_values)
            bias[:, : num_classes - 1] = prior_bias
            bias[:, num_classes - 1 :] = 0.0

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.project(self.act(self.features(x)))
        b, _, h, w = out.shape
        # (B, A*V, H, W) -> (B, H, W, A, V) -> (B, H*W*A, V)
        out = out.view(b, -1, self.num_values, h, w)
        out = out.permute(0, 3, 4, 1, 2).reshape(b, -1, self.num_values)
        return out


class DetectorNet(nn.Module):
    def __init__(self, cfg: NetConfig | None = None):
        super().__init__()
        self.cfg = cfg or NetConfig()
        cfg = self.cfg
        w = cfg.stem_width
        self.stem = nn.Sequential(
            SepConv2d(1, w, stride=2),
            nn.Mish(),
            SepConv2d(w, w),
            nn.Mish(),
            SepConv2d(w, w),
            nn.Mish(),
        )
        segments = []
        ch = w
        for _ in range(3):
            seg = FeatureSegment(ch, cfg)
            segments.append(seg)
            ch = seg.out_channels
        self.segments = nn.Sequential(*segments)

        scale_channels = [ch]
        extras = []
        for _ in range(cfg.num_scales - 1):
            block = DownBlock(ch, cfg.extra_mid_channels, cfg.extra_out_channels)
            extras.append(block)
            ch = block.out_channels
            scale_channels.append(ch)
        self.extras = nn.ModuleList(extras)

        self.heads = nn.ModuleList(
            PredictionHead(c, cfg.anchors_per_cell, cfg.num_classes, cfg.head_prior_bias)
            for c in scale_channels
        )

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Input (B, 1, S, S); returns class logits (B, N, C) and offsets (B, N, 4)."""
        feats = [self.segments(self.stem(x))]
        for block in self.extras:
            feats.append(block(feats[-1]))
        out = torch.cat([head(f) for head, f in zip(self.heads, feats)], dim=1)
        return out[..., : self.cfg.num_classes], out[..., self.cfg.num_classes :]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad)


def canvas_to_tensor(pixels: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    return torch.as_tensor(pixels, dtype=dtype).unsqueeze(0).unsqueeze(0)


def run_forward(
    image: RenderedCanvas | np.ndarray, net: DetectorNet
) -> tuple[np.ndarray, np.ndarray]:
    """Single-image inference: softmax class scores (N, C) and offsets (N, 4).

    Raises ValueError when the image does not match the configured input size.
    """
    pixels = image.pixels if isinstance(image, RenderedCanvas) else image
    size = net.cfg.input_size
    if pixels.shape != (size, size):
        raise ValueError(f"expected {size}x{size} input, got {pixels.shape}")
    dtype = next(net.parameters()).dtype
    with torch.no_grad():
        logits, offsets = net(canvas_to_tensor(pixels, dtype))
        probs = torch.softmax(logits, dim=-1)
    return probs[0].numpy(), offsets[0].numpy()
