"""Axis-aligned box arithmetic: IoU, greedy NMS, pyramid coordinate mapping.

Boxes are (x, y, w, h) with continuous coordinates; area is w*h with no
+1 pixel convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Box2D:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box field {name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class ScoredBox:
    box: Box2D
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score!r}")


def iou(a: Box2D, b: Box2D) -> float:
    """Jaccard similarity (intersection over union) of two boxes, in [0, 1]."""
    if a == b:
        return 1.0
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    # the exact value cannot exceed 1; anything above is rounding noise
    return min(inter / union, 1.0)


def nms(boxes: Sequence[ScoredBox], overlap_threshold: float) -> list[ScoredBox]:
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-score remaining box and discards remaining
    boxes whose IoU with it is strictly greater than `overlap_threshold`.
    Score ties are broken by earlier input index. The result is sorted by
    descending score and is a subset of the input.
    """
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ValueError(f"overlap threshold must be in [0, 1], got {overlap_threshold}")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    kept: list[ScoredBox] = []
    for i in order:
        candidate = boxes[i]
        if all(iou(candidate.box, k.box) <= overlap_threshold for k in kept):
            kept.append(candidate)
    return kept


def rescale_box(b: Box2D, scale: float) -> Box2D:
    """Divide every coordinate and size by `scale`.

    Maps a box found on a pyramid level built at `scale` back to
    original-image coordinates.
    """
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be a positive finite real, got {scale!r}")
    return Box2D(b.x / scale, b.y / scale, b.w / scale, b.h / scale)


def clamp_box(b: Box2D, width: float, height: float) -> Box2D | None:
    """Clamp a box to [0, width] x [0, height]; None if it collapses.

    A box already inside the bounds is returned as-is (bit-identical).
    """
    if b.x >= 0 and b.y >= 0 and b.x2 <= width and b.y2 <= height:
        return b
    x1 = min(max(b.x, 0.0), width)
    y1 = min(max(b.y, 0.0), height)
    x2 = min(max(b.x2, 0.0), width)
    y2 = min(max(b.y2, 0.0), height)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None
    return Box2D(x1, y1, x2 - x1, y2 - y1)


def center_distance(a: Box2D, b: Box2D) -> float:
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)
