"""Shared data model: image planes, masks, probability maps, boxes, counts.

All types are immutable after construction (arrays are frozen), every
operation is pure. Boxes follow a half-open integer pixel convention:
a box (x, y, w, h) covers rows y..y+h-1 and columns x..x+w-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError

__all__ = [
    "ImagePlane",
    "BinaryMask",
    "ProbabilityMap",
    "BoundingBox",
    "ConfusionCounts",
    "boxes_to_mask",
    "mask_to_boxes",
    "box_iou",
    "label_components",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_plane_shape(data: np.ndarray, what: str) -> None:
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise InputError(f"{what} must be a 2-D array with positive dims, got shape {data.shape}")


@dataclass(frozen=True)
class ImagePlane:
    """Single-channel intensity image, row-major, float values."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        _check_plane_shape(data, "ImagePlane")
        if not np.all(np.isfinite(data)):
            raise InputError("ImagePlane values must be finite")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel {0,1} labeling, 1 = ROI/foreground."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        _check_plane_shape(data, "BinaryMask")
        if data.dtype != np.uint8:
            vals = np.unique(data)
            if not np.all(np.isin(vals, (0, 1))):
                raise InputError("BinaryMask values must be 0 or 1")
            data = data.astype(np.uint8)
        elif data.size and data.max() > 1:
            raise InputError("BinaryMask values must be 0 or 1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def complement(self) -> "BinaryMask":
        return BinaryMask(1 - self.data)

    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel real values in [0, 1] (model output or fusion posterior)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        _check_plane_shape(data, "ProbabilityMap")
        if not np.all(np.isfinite(data)):
            raise InputError("ProbabilityMap values must be finite")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise InputError("ProbabilityMap values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def threshold(self, level: float) -> BinaryMask:
        """Binarize with the >= convention (ties go to foreground)."""
        return BinaryMask((self.data >= level).astype(np.uint8))


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned rectangle; half-open: covers [x, x+w) x [y, y+h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise InputError(f"BoundingBox.{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"BoundingBox must have positive area, got w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise InputError(f"BoundingBox origin must be non-negative, got x={self.x}, y={self.y}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class ConfusionCounts:
    """TP/FP/FN/TN tallies. tn is None at instance level (no meaningful TN)."""

    tp: int
    fp: int
    fn: int
    tn: int | None = None

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            v = getattr(self, name)
            if v < 0 or int(v) != v:
                raise InputError(f"ConfusionCounts.{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        if self.tn is not None:
            if self.tn < 0 or int(self.tn) != self.tn:
                raise InputError("ConfusionCounts.tn must be a non-negative integer")
            object.__setattr__(self, "tn", int(self.tn))

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        tn = None
        if self.tn is not None and other.tn is not None:
            tn = self.tn + other.tn
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, tn)


def boxes_to_mask(boxes: Sequence[BoundingBox], width: int, height: int) -> BinaryMask:
    """Rasterize a union of boxes into a binary mask.

    Boxes partially outside the frame are clipped; a box entirely outside
    the frame is an error naming the offending box.
    """
    if width < 1 or height < 1:
        raise InputError(f"frame must be at least 1x1, got {width}x{height}")
    out = np.zeros((height, width), dtype=np.uint8)
    for i, b in enumerate(boxes):
        if b.x >= width or b.y >= height:
            raise InputError(f"box #{i} {b.as_dict()} lies entirely outside the {width}x{height} frame")
        x1 = min(b.x + b.w, width)
        y1 = min(b.y + b.h, height)
        out[b.y:y1, b.x:x1] = 1
    return BinaryMask(out)


_STRUCT4 = ndimage.generate_binary_structure(2, 1)
_STRUCT8 = ndimage.generate_binary_structure(2, 2)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCT4
    if connectivity == 8:
        return _STRUCT8
    raise InputError(f"connectivity must be 4 or 8, got {connectivity}")


def label_components(mask: BinaryMask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected foreground components.

    Labels are renumbered 1..n in raster order of each component's first
    (seed) pixel, so the numbering is deterministic and diffable.
    """
    labels, n = ndimage.label(mask.data, structure=_structure(connectivity))
    if n == 0:
        return labels, 0
    flat = labels.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    # reversed so the first occurrence wins
    first[flat[idx[::-1]]] = idx[::-1]
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=labels.dtype)
    remap[1 + order] = np.arange(1, n + 1)
    return remap[labels], n


def mask_to_boxes(mask: BinaryMask, connectivity: int = 8) -> list[BoundingBox]:
    """One tight box per connected foreground component, in seed raster order."""
    labels, n = label_components(mask, connectivity)
    boxes = []
    slices = ndimage.find_objects(labels)
    for sl in slices:
        ys, xs = sl
        boxes.append(BoundingBox(x=xs.start, y=ys.start, w=xs.stop - xs.start, h=ys.stop - ys.start))
    return boxes


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes under the half-open convention."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union
