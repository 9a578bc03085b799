"""Bridge from annotated sessions to detector training examples."""

from __future__ import annotations

from typing import Sequence

from sketchmon.datakit.gt import ground_truth_boxes
from sketchmon.datakit.schema import AnnotatedSession
from sketchmon.detector.train import TrainExample
from sketchmon.strokes import CanvasSnapshot, RenderConfig, rasterize


def examples_from_sessions(
    sessions: Sequence[AnnotatedSession], render_cfg: RenderConfig = RenderConfig()
) -> list[TrainExample]:
    out = []
    for s in sessions:
        snapshot = CanvasSnapshot(s.session_id, 0, tuple(s.strokes))
        image = rasterize(snapshot, render_cfg).pixels
        out.append(
            TrainExample(
                image_id=s.session_id,
                image=image,
                boxes=tuple(ground_truth_boxes(s, render_cfg)),
            )
        )
    return out
