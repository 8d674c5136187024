"""Axis-aligned boxes (cx, cy, w, h), IoU, and non-maximum suppression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DetectionBox:
    cx: float
    cy: float
    w: float
    h: float
    confidence: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box width and height must be positive")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must lie in [0,1]")

    def as_xyxy(self):
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )


def iou(a, b) -> float:
    """Intersection over union of two (cx, cy, w, h) boxes.

    Defined as 0 when both boxes are degenerate (zero area).
    """
    ax, ay, aw, ah = float(a[0]), float(a[1]), float(a[2]), float(a[3])
    bx, by, bw, bh = float(b[0]), float(b[1]), float(b[2]), float(b[3])
    if aw < 0 or ah < 0 or bw < 0 or bh < 0:
        raise ValueError("box dimensions must be nonnegative")
    ix = max(0.0, min(ax + aw / 2, bx + bw / 2) - max(ax - aw / 2, bx - bw / 2))
    iy = max(0.0, min(ay + ah / 2, by + bh / 2) - max(ay - ah / 2, by - bh / 2))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


def nms(boxes: list, iou_thresh: float) -> list:
    """Greedy confidence-ordered suppression; result sorted by confidence."""
    ordered = sorted(boxes, key=lambda b: -b.confidence)
    kept = []
    for cand in ordered:
        c = (cand.cx, cand.cy, cand.w, cand.h)
        if all(iou(c, (k.cx, k.cy, k.w, k.h)) <= iou_thresh for k in kept):
            kept.append(cand)
    return kept
