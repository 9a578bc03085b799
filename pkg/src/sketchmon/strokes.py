"""Geometry of canvas events: strokes, simplification, accumulation, rasterization.

Coordinates are real-valued with the origin at the top-left of the canvas.
Pixel (row, col) covers the unit square [col, col+1) x [row, row+1); its
center sits at (col + 0.5, row + 0.5). A pixel is ink iff its center lies
within thickness/2 of a stroke polyline, which makes rasterization
deterministic and orientation-independent (round caps and joins).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class StrokeKind(str, Enum):
    DRAW = "draw"
    ERASE = "erase"


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Stroke:
    """A timestamped polyline; the atomic canvas event."""

    stroke_id: int
    kind: StrokeKind
    timestamp_ms: int
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.points) == 0:
            raise ValueError("stroke needs at least one point")

    @property
    def is_draw(self) -> bool:
        return self.kind is StrokeKind.DRAW


@dataclass(frozen=True)
class SimplifyConfig:
    epsilon: float = 2.0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class RenderConfig:
    width: int = 512
    height: int = 512
    draw_thickness: float = 4.0
    erase_thickness: float = 16.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canvas dimensions must be positive")
        if self.draw_thickness <= 0 or self.erase_thickness <= 0:
            raise ValueError("thicknesses must be positive")


@dataclass(frozen=True)
class CanvasSnapshot:
    """Accumulated strokes of one session at a point in time."""

    session_id: str
    snapshot_seq: int
    strokes: tuple[Stroke, ...]


@dataclass
class RenderedCanvas:
    """Binary raster of a snapshot. pixels[row, col] is 0 or 1 (uint8)."""

    session_id: str
    snapshot_seq: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D grid")


def _chord_distance(p: Point, a: Point, b: Point) -> float:
    """Distance of p from the chord segment a-b.

    Segment distance (not infinite-line distance) so polylines that double
    back past a chord endpoint are not flattened onto it.
    """
    dx, dy = b.x - a.x, b.y - a.y
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return math.hypot(p.x - a.x, p.y - a.y)
    t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / l2
    t = min(1.0, max(0.0, t))
    return math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy))


def simplify(stroke: Stroke, cfg: SimplifyConfig = SimplifyConfig()) -> Stroke:
    """Ramer-Douglas-Peucker decimation of a stroke's polyline.

    Keeps a subsequence of the input points including both endpoints, such
    that every dropped point deviates at most epsilon from the simplified
    polyline. Kind, timestamp and id are preserved.
    """
    pts = stroke.points
    if len(pts) <= 2:
        return stroke
    keep = [False] * len(pts)
    keep[0] = keep[-1] = True
    # Iterative recursion over (first, last) chords. The split point is the
    # argmax deviation (first index on ties), which does not depend on
    # epsilon; that makes the output idempotent and monotone in epsilon.
    stack = [(0, len(pts) - 1)]
    while stack:
        first, last = stack.pop()
        dmax = 0.0
        index = first
        for i in range(first + 1, last):
            d = _chord_distance(pts[i], pts[first], pts[last])
            if d > dmax:
                dmax = d
                index = i
        if dmax > cfg.epsilon:
            keep[index] = True
            stack.append((first, index))
            stack.append((index, last))
    new_points = tuple(p for p, k in zip(pts, keep) if k)
    return Stroke(stroke.stroke_id, stroke.kind, stroke.timestamp_ms, new_points)


def _stamp_segment(
    pixels: np.ndarray, a: Point, b: Point, radius: float, value: int
) -> None:
    """Set pixels whose center lies within radius of segment a-b."""
    h, w = pixels.shape
    x0 = max(0, int(math.floor(min(a.x, b.x) - radius - 0.5)))
    x1 = min(w - 1, int(math.ceil(max(a.x, b.x) + radius - 0.5)))
    y0 = max(0, int(math.floor(min(a.y, b.y) - radius - 0.5)))
    y1 = min(h - 1, int(math.ceil(max(a.y, b.y) + radius - 0.5)))
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    dx, dy = b.x - a.x, b.y - a.y
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0.0:
        dist2 = (px - a.x) ** 2 + (py - a.y) ** 2
    else:
        t = ((px - a.x) * dx + (py - a.y) * dy) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        dist2 = (px - (a.x + t * dx)) ** 2 + (py - (a.y + t * dy)) ** 2
    mask = dist2 <= radius * radius
    pixels[y0 : y1 + 1, x0 : x1 + 1][mask] = value


def rasterize(snapshot: CanvasSnapshot, cfg: RenderConfig = RenderConfig()) -> RenderedCanvas:
    """Render accumulated strokes to a binary image.

    Strokes apply in list order (snapshots keep timestamp order): draw
    strokes set ink within draw_thickness/2 of their polyline, erase strokes
    clear within erase_thickness/2. Out-of-range geometry is clipped.
    """
    pixels = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    for stroke in snapshot.strokes:
        if stroke.kind is StrokeKind.DRAW:
            radius, value = cfg.draw_thickness / 2.0, 1
        else:
            radius, value = cfg.erase_thickness / 2.0, 0
        pts = stroke.points
        if len(pts) == 1:
            _stamp_segment(pixels, pts[0], pts[0], radius, value)
        else:
            for a, b in zip(pts, pts[1:]):
                _stamp_segment(pixels, a, b, radius, value)
    return RenderedCanvas(snapshot.session_id, snapshot.snapshot_seq, pixels)


def stroke_bbox(
    strokes: Sequence[Stroke],
    thickness: float,
    width: float = 512.0,
    height: float = 512.0,
) -> tuple[float, float, float, float]:
    """Minimal axis-aligned box (x0, y0, x1, y1) covering all draw points,
    expanded by thickness/2 per side and clipped to the canvas.

    Raises ValueError when the input has no draw strokes.
    """
    xs: list[float] = []
    ys: list[float] = []
    for stroke in strokes:
        if stroke.kind is StrokeKind.DRAW:
            xs.extend(p.x for p in stroke.points)
            ys.extend(p.y for p in stroke.points)
    if not xs:
        raise ValueError("stroke_bbox requires at least one draw stroke")
    half = thickness / 2.0
    x0 = max(0.0, min(xs) - half)
    y0 = max(0.0, min(ys) - half)
    x1 = min(width, max(xs) + half)
    y1 = min(height, max(ys) + half)
    return (x0, y0, x1, y1)


def group_by_erase(strokes: Iterable[Stroke]) -> list[list[Stroke]]:
    """Group consecutive draw strokes; each erase stroke ends the open group."""
    groups: list[list[Stroke]] = []
    current: list[Stroke] = []
    for stroke in strokes:
        if stroke.kind is StrokeKind.DRAW:
            current.append(stroke)
        elif current:
            groups.append(current)
            current = []
    if current:
        groups.append(current)
    return groups


# -- wire / file serialization ------------------------------------------------

def stroke_to_obj(stroke: Stroke) -> dict:
    """JSON-ready form: {id, kind, t_ms, pts} with coordinates at 2 decimals."""
    return {
        "id": stroke.stroke_id,
        "kind": stroke.kind.value,
        "t_ms": stroke.timestamp_ms,
        "pts": [[round(p.x, 2), round(p.y, 2)] for p in stroke.points],
    }


def stroke_from_obj(obj: dict) -> Stroke:
    try:
        kind = StrokeKind(obj["kind"])
        pts = tuple(Point(float(x), float(y)) for x, y in obj["pts"])
        return Stroke(int(obj["id"]), kind, int(obj["t_ms"]), pts)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed stroke object: {exc}") from exc


def stroke_to_json(stroke: Stroke) -> str:
    return json.dumps(stroke_to_obj(stroke), separators=(",", ":"))


def stroke_from_json(payload: str) -> Stroke:
    return stroke_from_obj(json.loads(payload))


def to_pgm(canvas: RenderedCanvas) -> bytes:
    """Debug export: binary PGM, ink as 255 on black 0."""
    h, w = canvas.pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + (canvas.pixels * 255).astype(np.uint8).tobytes()
