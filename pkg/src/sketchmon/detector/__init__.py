from sketchmon.detector.types import (
    Anchor,
    Category,
    DetectionBox,
    LossConfig,
    NetConfig,
    TrainConfig,
)
from sketchmon.detector.boxes import decode_offsets, encode_offsets, iou
from sketchmon.detector.anchors import AnchorSet, generate_anchors
from sketchmon.detector.losses import diou_loss, focal_loss, total_loss
from sketchmon.detector.matching import match_anchors
from sketchmon.detector.nms import decode_and_nms
from sketchmon.detector.runtime import (
    DetectTimeout,
    Detector,
    NetDetector,
    OracleInkDetector,
    StubDetector,
)
from sketchmon.detector.net import DetectorNet, run_forward
from sketchmon.detector.train import TrainExample, TrainResult, train
from sketchmon.detector.weights_io import load_weights, save_weights

__all__ = [
    "Anchor",
    "AnchorSet",
    "Category",
    "DetectionBox",
    "DetectTimeout",
    "Detector",
    "DetectorNet",
    "LossConfig",
    "NetConfig",
    "NetDetector",
    "OracleInkDetector",
    "StubDetector",
    "TrainConfig",
    "TrainExample",
    "TrainResult",
    "decode_and_nms",
    "load_weights",
    "run_forward",
    "save_weights",
    "train",
    "decode_offsets",
    "diou_loss",
    "encode_offsets",
    "focal_loss",
    "generate_anchors",
    "iou",
    "match_anchors",
    "total_loss",
]
