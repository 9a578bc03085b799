"""Annotated-session dataset records and the dataset manifest.

One JSON file per session; a manifest (JSON lines) lists files with their
phrase, annotation flag and split assignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from sketchmon.detector.types import Category
from sketchmon.strokes import Stroke, StrokeKind, stroke_from_obj, stroke_to_obj


@dataclass(frozen=True)
class Annotation:
    """Labels a set of draw strokes as one atypical content instance.

    `subcategory` keeps the fine-grained label when the annotator recorded
    one (e.g. "arrow" vs "question_mark" under icon); training always uses
    the coarse category.
    """

    stroke_ids: tuple[int, ...]
    category: Category
    subcategory: str | None = None

    def __post_init__(self) -> None:
        if not self.stroke_ids:
            raise ValueError("annotation needs at least one stroke id")
        if self.category is Category.BACKGROUND:
            raise ValueError("annotations use atypical categories only")


@dataclass
class AnnotatedSession:
    session_id: str
    phrase: str
    strokes: list[Stroke]
    annotations: list[Annotation] = field(default_factory=list)

    @property
    def has_annotations(self) -> bool:
        return bool(self.annotations)

    def validate(self) -> None:
        """Annotated ids must exist, be draw strokes, and not overlap."""
        by_id = {s.stroke_id: s for s in self.strokes}
        seen: set[int] = set()
        for ann in self.annotations:
            for sid in ann.stroke_ids:
                if sid not in by_id:
                    raise ValueError(f"annotation references unknown stroke {sid}")
                if by_id[sid].kind is not StrokeKind.DRAW:
                    raise ValueError(f"annotation references erase stroke {sid}")
                if sid in seen:
                    raise ValueError(f"stroke {sid} appears in two annotations")
                seen.add(sid)

    def to_obj(self) -> dict:
        out = {
            "session_id": self.session_id,
            "phrase": self.phrase,
            "strokes": [stroke_to_obj(s) for s in self.strokes],
            "annotations": [],
        }
        for a in self.annotations:
            ann = {"stroke_ids": list(a.stroke_ids), "category": a.category.value}
            if a.subcategory:
                ann["subcategory"] = a.subcategory
            out["annotations"].append(ann)
        return out

    @classmethod
    def from_obj(cls, obj: dict) -> "AnnotatedSession":
        session = cls(
            session_id=str(obj["session_id"]),
            phrase=str(obj["phrase"]),
            strokes=[stroke_from_obj(s) for s in obj["strokes"]],
            annotations=[
                Annotation(
                    tuple(a["stroke_ids"]),
                    Category(a["category"]),
                    a.get("subcategory"),
                )
                for a in obj.get("annotations", [])
            ],
        )
        session.validate()
        return session

    @classmethod
    def from_game_record(
        cls, record: dict, annotations: list[Annotation] | None = None
    ) -> "AnnotatedSession":
        """Lift a persisted game-session record into a dataset record.

        Strokes come from the record's event log; the target phrase becomes
        the grouping key for splits and augmentation.
        """
        strokes = [
            stroke_from_obj(e["stroke"]) for e in record["events"] if e["type"] == "stroke"
        ]
        session = cls(
            session_id=str(record["session_id"]),
            phrase=str(record["target"]),
            strokes=strokes,
            annotations=list(annotations or []),
        )
        session.validate()
        return session


def save_session(session: AnnotatedSession, path: str | Path) -> None:
    Path(path).write_text(json.dumps(session.to_obj(), indent=1))


def load_session(path: str | Path) -> AnnotatedSession:
    return AnnotatedSession.from_obj(json.loads(Path(path).read_text()))


def write_manifest(entries: list[dict], path: str | Path) -> None:
    """entries: {path, phrase, has_annotations, split} per line."""
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")


def read_manifest(path: str | Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
