"""Ground-truth box generation from annotated stroke subsequences."""

from __future__ import annotations

from sketchmon.datakit.schema import AnnotatedSession
from sketchmon.detector.types import DetectionBox
from sketchmon.strokes import RenderConfig, stroke_bbox


def ground_truth_boxes(
    session: AnnotatedSession, render_cfg: RenderConfig = RenderConfig()
) -> list[DetectionBox]:
    """One box per annotation: the rendered extent of its draw strokes.

    Later erasures do not shrink a box; the annotation owns the strokes as
    drawn.
    """
    session.validate()
    by_id = {s.stroke_id: s for s in session.strokes}
    out = []
    for ann in session.annotations:
        strokes = [by_id[sid] for sid in ann.stroke_ids]
        x0, y0, x1, y1 = stroke_bbox(
            strokes, render_cfg.draw_thickness, render_cfg.width, render_cfg.height
        )
        out.append(
            DetectionBox(
                cx=(x0 + x1) / 2,
                cy=(y0 + y1) / 2,
                w=x1 - x0,
                h=y1 - y0,
                category=ann.category,
                confidence=1.0,
            )
        )
    return out
