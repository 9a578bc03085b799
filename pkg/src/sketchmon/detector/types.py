"""Shared detector types: categories, boxes, anchors, and configs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Category(Enum):
    """Atypical canvas content classes plus the background target class.

    Background appears only in classification targets, never in emitted
    detection boxes.
    """

    TEXT = "text"
    NUMBER = "number"
    CIRCLE = "circle"
    ICON = "icon"
    BACKGROUND = "background"

    @property
    def index(self) -> int:
        return _CATEGORY_ORDER.index(self)


_CATEGORY_ORDER = [
    Category.TEXT,
    Category.NUMBER,
    Category.CIRCLE,
    Category.ICON,
    Category.BACKGROUND,
]

ATYPICAL_CATEGORIES = tuple(_CATEGORY_ORDER[:-1])
NUM_CLASSES = len(_CATEGORY_ORDER)  # 4 atypical + background
BACKGROUND_INDEX = Category.BACKGROUND.index


def category_from_index(i: int) -> Category:
    return _CATEGORY_ORDER[i]


@dataclass(frozen=True)
class DetectionBox:
    """Axis-aligned box in canvas pixels, center form."""

    cx: float
    cy: float
    w: float
    h: float
    category: Category
    confidence: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got {self.w}x{self.h}")
        if self.category is Category.BACKGROUND:
            raise ValueError("detection boxes never carry the background class")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of range: {self.confidence}")

    def corners(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )


@dataclass(frozen=True)
class Anchor:
    """One reference box at a feature-map cell."""

    cx: float
    cy: float
    w: float
    h: float
    scale_index: int
    cell_row: int
    cell_col: int
    aspect_ratio: float
    vertical_offset: float  # in cell heights, -0.25 or +0.25


ASPECT_RATIOS = (1.0, 2.0, 3.0, 4.0, 5.0, 1 / 2, 1 / 3, 1 / 5)
VERTICAL_OFFSETS = (-0.25, 0.25)


@dataclass(frozen=True)
class NetConfig:
    """Network shape. Defaults target the 512 canvas; ``toy()`` is the small
    profile used by property and gradient tests.

    The extractor is a stem of three 3x3 separable convs (first stride 2)
    followed by three segments of [2x2 max pool -> dense block -> 1x1
    separable transition halving channels]. The segment output is prediction
    scale 0; each further scale comes from a downsampling block (1x1 then
    3x3 stride-2 separable convs).
    """

    input_size: int = 512
    num_scales: int = 4
    stem_width: int = 64
    growth: int = 48
    block_layers: int = 6
    bottleneck_factor: int = 4
    extra_mid_channels: int = 128
    extra_out_channels: int = 256
    aspect_ratios: tuple[float, ...] = ASPECT_RATIOS
    vertical_offsets: tuple[float, ...] = VERTICAL_OFFSETS
    anchor_base_factor: float = 1.5  # anchor base side = factor * stride
    num_classes: int = NUM_CLASSES
    # initial foreground-logit bias of the prediction heads; a negative
    # prior starts the background sea near-converged. 0 = uninformative.
    head_prior_bias: float = -4.5

    def __post_init__(self) -> None:
        if self.num_scales < 1:
            raise ValueError("need at least one prediction scale")
        if self.input_size % self.stride_for_scale(self.num_scales - 1) != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by the coarsest "
                f"stride {self.stride_for_scale(self.num_scales - 1)}"
            )

    @staticmethod
    def stride_for_scale(scale: int) -> int:
        # stem /2, three pools /8 -> scale 0 stride 16; each extra block /2.
        return 16 * (2**scale)

    def feature_size(self, scale: int) -> int:
        return self.input_size // self.stride_for_scale(scale)

    @property
    def anchors_per_cell(self) -> int:
        return len(self.aspect_ratios) * len(self.vertical_offsets)

    @property
    def total_anchors(self) -> int:
        return sum(
            self.feature_size(s) ** 2 * self.anchors_per_cell
            for s in range(self.num_scales)
        )

    @classmethod
    def toy(cls) -> "NetConfig":
        """64x64 input, 2 scales, thin channels; used for fast tests."""
        return cls(
            input_size=64,
            num_scales=2,
            stem_width=16,
            growth=8,
            bottleneck_factor=2,
            extra_mid_channels=16,
            extra_out_channels=32,
        )


@dataclass(frozen=True)
class LossConfig:
    """Weights and thresholds of the combined detection loss."""

    alpha: float = 1000.0  # classification term weight
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    match_iou_positive: float = 0.5
    mining_band: tuple[float, float] = (0.45, 0.55)

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        lo, hi = self.mining_band
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("mining band must lie within [0, 1]")


class TrainMode(Enum):
    TEXT_ONLY = "text_only"  # hard mining of borderline false positives
    MULTICLASS = "multiclass"  # class-balanced batch resampling


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    epochs: int = 50
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    mode: TrainMode = TrainMode.MULTICLASS
    loss: LossConfig = field(default_factory=LossConfig)
    score_thresh: float = 0.5  # used by the mining pass
    nms_iou: float = 0.45
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
