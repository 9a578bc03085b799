from sketchmon.datakit.schema import (
    AnnotatedSession,
    Annotation,
    load_session,
    read_manifest,
    save_session,
    write_manifest,
)
from sketchmon.datakit.gt import ground_truth_boxes
from sketchmon.datakit.split import SplitSpec, split
from sketchmon.datakit.evaluate import EvalReport, evaluate
from sketchmon.datakit.augment import AugmentPlacementError, augment
from sketchmon.datakit.trainset import examples_from_sessions

__all__ = [
    "AnnotatedSession",
    "Annotation",
    "AugmentPlacementError",
    "EvalReport",
    "SplitSpec",
    "augment",
    "evaluate",
    "examples_from_sessions",
    "ground_truth_boxes",
    "load_session",
    "read_manifest",
    "save_session",
    "split",
    "write_manifest",
]
