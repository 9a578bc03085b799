"""Deterministic train/val/test splitting, grouped by target phrase.

Annotated and clean sessions of each phrase split separately, so both pools
keep the configured ratios.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from sketchmon.datakit.schema import AnnotatedSession

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self) -> None:
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")


def _group_seed(seed: int, phrase: str, has_annotations: bool) -> int:
    digest = hashlib.sha256(f"{seed}:{phrase}:{int(has_annotations)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Floor-based sizes; the 0-2 leftover items go to train, then val."""
    sizes = [int(n * r) for r in ratios]
    i = 0
    while sum(sizes) < n:
        sizes[i] += 1
        i += 1
    return sizes


def split(
    sessions: Sequence[AnnotatedSession], spec: SplitSpec = SplitSpec()
) -> dict[str, list[AnnotatedSession]]:
    groups: dict[tuple[str, bool], list[AnnotatedSession]] = {}
    for s in sessions:
        groups.setdefault((s.phrase, s.has_annotations), []).append(s)

    out: dict[str, list[AnnotatedSession]] = {name: [] for name in SPLIT_NAMES}
    for (phrase, flag), members in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        members = sorted(members, key=lambda s: s.session_id)
        random.Random(_group_seed(spec.seed, phrase, flag)).shuffle(members)
        sizes = _allocate(len(members), spec.ratios)
        start = 0
        for name, size in zip(SPLIT_NAMES, sizes):
            out[name].extend(members[start : start + size])
            start += size
    return out
