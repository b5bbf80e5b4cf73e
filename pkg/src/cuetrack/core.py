"""Geometry primitives and the shared detection/track data model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, DataError

EMBEDDING_DIM = 32

TENTATIVE = "tentative"
STABLE = "stable"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in center/size form, pixel units."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DataError(f"box width/height must be positive, got w={self.w} h={self.h}")

    @property
    def left(self) -> float:
        return self.cx - 0.5 * self.w

    @property
    def right(self) -> float:
        return self.cx + 0.5 * self.w

    @property
    def top(self) -> float:
        return self.cy - 0.5 * self.h

    @property
    def bottom(self) -> float:
        return self.cy + 0.5 * self.h

    @property
    def center(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        return cls(0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    objectness: float
    class_id: int
    class_score: float
    embedding: Tuple[float, ...]
    # previous-frame center = current center + displacement
    displacement: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if len(self.embedding) != EMBEDDING_DIM:
            raise DimensionError(
                f"embedding must have {EMBEDDING_DIM} components, got {len(self.embedding)}"
            )
        for name in ("objectness", "class_score"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {value}")
        if self.displacement is not None and len(self.displacement) != 2:
            raise DimensionError("displacement must be a 2-vector")


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    timestamp: float
    detections: Tuple[Detection, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class TrackOutput:
    frame_index: int
    track_id: int
    box: BoundingBox
    class_id: int
    status: str


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def l2_distance(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(math.sqrt(np.dot(u - v, u - v)))


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) array of (cx, cy, w, h)."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([[b.cx, b.cy, b.w, b.h] for b in boxes], dtype=np.float64)
