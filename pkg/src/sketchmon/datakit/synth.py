"""Synthetic glyph sessions for tests and the toy training runs.

Glyphs are plain point-list shapes: text-like zigzag clusters, polygonal
circles, and arrows. They exist so the detector can be exercised end to end
without the real recorded-game dataset.
"""

from __future__ import annotations

import math

import numpy as np

from sketchmon.datakit.augment import augment
from sketchmon.datakit.schema import AnnotatedSession, Annotation
from sketchmon.detector.types import Category
from sketchmon.strokes import Point, RenderConfig, Stroke, StrokeKind

TOY_RENDER = RenderConfig(width=64, height=64, draw_thickness=2.0, erase_thickness=8.0)

GLYPH_CATEGORY = {
    "text": Category.TEXT,
    "circle": Category.CIRCLE,
    "arrow": Category.ICON,
}


def text_glyph(rng: np.random.Generator, cx: float, cy: float, width: float, height: float):
    """A horizontal row of jagged letter-like marks; one point list per mark."""
    n_chars = int(rng.integers(3, 6))
    step = width / n_chars
    marks = []
    for i in range(n_chars):
        x0 = cx - width / 2 + i * step
        pts = []
        n_pts = int(rng.integers(3, 6))
        for j in range(n_pts):
            px = x0 + (j / max(1, n_pts - 1)) * step * 0.8
            py = cy + (height / 2) * (1 if j % 2 else -1) * float(rng.uniform(0.5, 1.0))
            pts.append((px, py))
        marks.append(pts)
    return marks


def circle_glyph(rng: np.random.Generator, cx: float, cy: float, radius: float):
    n = int(rng.integers(10, 16))
    start = float(rng.uniform(0, 2 * math.pi))
    pts = [
        (cx + radius * math.cos(start + 2 * math.pi * k / n),
         cy + radius * math.sin(start + 2 * math.pi * k / n))
        for k in range(n + 1)
    ]
    return [pts]


def arrow_glyph(rng: np.random.Generator, cx: float, cy: float, length: float, angle: float):
    c, s = math.cos(angle), math.sin(angle)
    tail = (cx - c * length / 2, cy - s * length / 2)
    head = (cx + c * length / 2, cy + s * length / 2)
    barb = length * 0.3
    left = (
        head[0] - barb * math.cos(angle - math.pi / 6),
        head[1] - barb * math.sin(angle - math.pi / 6),
    )
    right = (
        head[0] - barb * math.cos(angle + math.pi / 6),
        head[1] - barb * math.sin(angle + math.pi / 6),
    )
    return [[tail, head], [left, head, right]]


def scribble(rng: np.random.Generator, cx: float, cy: float, extent: float, n_pts: int = 8):
    """A wandering background stroke confined to a small box."""
    pts = []
    x, y = cx, cy
    for _ in range(n_pts):
        x = float(np.clip(x + rng.uniform(-extent / 3, extent / 3), cx - extent / 2, cx + extent / 2))
        y = float(np.clip(y + rng.uniform(-extent / 3, extent / 3), cy - extent / 2, cy + extent / 2))
        pts.append((x, y))
    return [pts]


def _strokes_from_point_lists(point_lists, first_id: int, first_t: int) -> list[Stroke]:
    out = []
    for i, pts in enumerate(point_lists):
        out.append(
            Stroke(
                first_id + i,
                StrokeKind.DRAW,
                first_t + 100 * i,
                tuple(Point(float(x), float(y)) for x, y in pts),
            )
        )
    return out


def glyph_point_lists(kind: str, rng: np.random.Generator, cfg: RenderConfig):
    """Point lists for one glyph roughly centered mid-canvas, sized to the canvas."""
    scale = min(cfg.width, cfg.height)
    cx, cy = cfg.width / 2, cfg.height / 2
    if kind == "text":
        w = float(rng.uniform(0.42, 0.58)) * scale
        h = float(rng.uniform(0.12, 0.2)) * scale
        return text_glyph(rng, cx, cy, w, h)
    if kind == "circle":
        return circle_glyph(rng, cx, cy, float(rng.uniform(0.16, 0.24)) * scale)
    if kind == "arrow":
        length = float(rng.uniform(0.4, 0.55)) * scale
        return arrow_glyph(rng, cx, cy, length, float(rng.uniform(0, 2 * math.pi)))
    raise ValueError(f"unknown glyph kind {kind!r}")


def glyph_session(
    kind: str,
    seed: int,
    cfg: RenderConfig = TOY_RENDER,
    phrase: str = "glyph",
    session_id: str | None = None,
) -> AnnotatedSession:
    """One annotated session holding a single centered glyph."""
    rng = np.random.default_rng(seed)
    strokes = _strokes_from_point_lists(glyph_point_lists(kind, rng, cfg), 0, 0)
    session = AnnotatedSession(
        session_id=session_id or f"{kind}-{seed}",
        phrase=phrase,
        strokes=strokes,
        annotations=[Annotation(tuple(s.stroke_id for s in strokes), GLYPH_CATEGORY[kind])],
    )
    session.validate()
    return session


def clean_session(
    seed: int,
    cfg: RenderConfig = TOY_RENDER,
    phrase: str = "glyph",
    with_scribble: bool = True,
) -> AnnotatedSession:
    """An annotation-free session, optionally with a corner scribble."""
    rng = np.random.default_rng(seed)
    strokes: list[Stroke] = []
    if with_scribble:
        extent = 0.22 * min(cfg.width, cfg.height)
        corner = rng.integers(0, 4)
        cx = extent if corner % 2 == 0 else cfg.width - extent
        cy = extent if corner < 2 else cfg.height - extent
        strokes = _strokes_from_point_lists(scribble(rng, float(cx), float(cy), extent), 0, 0)
    return AnnotatedSession(
        session_id=f"clean-{seed}", phrase=phrase, strokes=strokes, annotations=[]
    )


def overfit_dataset(
    seed: int = 0, count: int = 20, cfg: RenderConfig = TOY_RENDER
) -> list[AnnotatedSession]:
    """`count` augmented canvases built from synthetic glyph donors."""
    kinds = ["text", "circle", "arrow"]
    donors = [glyph_session(kinds[i % 3], seed * 1000 + i, cfg) for i in range(6)]
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        clean = clean_session(seed * 1000 + 500 + i, cfg, with_scribble=(i % 2 == 0))
        session = augment([clean], donors, rng, cfg)
        out.append(
            AnnotatedSession(
                session_id=f"overfit-{i}",
                phrase=session.phrase,
                strokes=session.strokes,
                annotations=session.annotations,
            )
        )
    return out
