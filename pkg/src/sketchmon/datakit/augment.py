"""Dataset augmentation: transplant atypical stroke subsequences onto clean
sessions of the same target phrase.

The donor subsequence is rotated about its centroid and placed by rejection
sampling so its rendered bounding box stays fully on canvas and never
overlaps any existing draw stroke's bounding box.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from sketchmon.datakit.schema import AnnotatedSession, Annotation
from sketchmon.strokes import Point, RenderConfig, Stroke, StrokeKind, stroke_bbox

MAX_PLACEMENT_ATTEMPTS = 100


class AugmentPlacementError(RuntimeError):
    """No disjoint placement found within the attempt budget."""


def _rotate(points: list[tuple[float, float]], angle: float) -> list[tuple[float, float]]:
    cx = sum(p[0] for p in points) / len(points)
    cy = sum(p[1] for p in points) / len(points)
    c, s = math.cos(angle), math.sin(angle)
    return [
        (cx + (x - cx) * c - (y - cy) * s, cy + (x - cx) * s + (y - cy) * c)
        for x, y in points
    ]


def _boxes_overlap(a, b) -> bool:
    # zero-area contact does not count as overlap
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def augment(
    clean_pool: Sequence[AnnotatedSession],
    donor_pool: Sequence[AnnotatedSession],
    seed: int | np.random.Generator,
    render_cfg: RenderConfig = RenderConfig(),
    angle: float | None = None,
) -> AnnotatedSession:
    """Build one synthetic annotated session.

    Pools must share the target phrase; the clean session must carry no
    annotations and the donor at least one. `angle` overrides the uniform
    random rotation (tests use 0).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    donors = [s for s in donor_pool if s.has_annotations]
    if not donors:
        raise ValueError("donor pool has no annotated sessions")
    cleans = [s for s in clean_pool if not s.has_annotations]
    if not cleans:
        raise ValueError("clean pool has no annotation-free sessions")

    clean = cleans[int(rng.integers(0, len(cleans)))]
    donor = donors[int(rng.integers(0, len(donors)))]
    if clean.phrase != donor.phrase:
        raise ValueError(
            f"phrase mismatch: clean={clean.phrase!r} donor={donor.phrase!r}"
        )
    annotation = donor.annotations[int(rng.integers(0, len(donor.annotations)))]
    by_id = {s.stroke_id: s for s in donor.strokes}
    subsequence = [by_id[sid] for sid in annotation.stroke_ids]

    theta = float(rng.uniform(0.0, 2 * math.pi)) if angle is None else float(angle)
    flat: list[tuple[float, float]] = [
        (p.x, p.y) for s in subsequence for p in s.points
    ]
    rotated = _rotate(flat, theta)

    half = render_cfg.draw_thickness / 2.0
    xs = [p[0] for p in rotated]
    ys = [p[1] for p in rotated]
    bw = (max(xs) - min(xs)) + 2 * half
    bh = (max(ys) - min(ys)) + 2 * half
    if bw > render_cfg.width or bh > render_cfg.height:
        raise AugmentPlacementError("subsequence larger than the canvas")

    existing = [
        stroke_bbox([s], render_cfg.draw_thickness, render_cfg.width, render_cfg.height)
        for s in clean.strokes
        if s.kind is StrokeKind.DRAW
    ]

    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        tx = float(rng.uniform(bw / 2, render_cfg.width - bw / 2))
        ty = float(rng.uniform(bh / 2, render_cfg.height - bh / 2))
        dx = tx - (min(xs) + max(xs)) / 2
        dy = ty - (min(ys) + max(ys)) / 2
        box = (tx - bw / 2, ty - bh / 2, tx + bw / 2, ty + bh / 2)
        if any(_boxes_overlap(box, other) for other in existing):
            continue

        next_id = max((s.stroke_id for s in clean.strokes), default=-1) + 1
        last_t = max((s.timestamp_ms for s in clean.strokes), default=0)
        new_strokes: list[Stroke] = []
        new_ids: list[int] = []
        offset = 0
        for i, s in enumerate(subsequence):
            pts = tuple(
                Point(x + dx, y + dy)
                for x, y in rotated[offset : offset + len(s.points)]
            )
            offset += len(s.points)
            new_strokes.append(
                Stroke(next_id + i, StrokeKind.DRAW, last_t + 100 * (i + 1), pts)
            )
            new_ids.append(next_id + i)
        out = AnnotatedSession(
            session_id=f"{clean.session_id}+aug",
            phrase=clean.phrase,
            strokes=list(clean.strokes) + new_strokes,
            annotations=[Annotation(tuple(new_ids), annotation.category)],
        )
        out.validate()
        return out

    raise AugmentPlacementError(
        f"no disjoint placement after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )
