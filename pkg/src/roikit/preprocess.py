"""Preprocessing chain: lung crop, resize, contrast saturation, standardize.

The chain runs crop -> resize -> percentile saturation (which also rescales
to [0,1]) -> zero-mean/unit-variance standardization, and records the crop
transform so annotation boxes can be carried through the same geometry.
Resizing uses align-corners-false sampling: source coordinate of output
column j is (j + 0.5) * in/out - 0.5, clamped to the valid range.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, BoundingBox, ImagePlane
from .errors import DegenerateWarning, DroppedItemWarning, InputError

__all__ = [
    "NormalizationStats",
    "CropTransform",
    "lung_crop",
    "resize",
    "resize_mask",
    "saturate_contrast",
    "standardize",
    "rescale_boxes",
    "preprocess_chain",
]


@dataclass(frozen=True)
class NormalizationStats:
    mean: float
    std: float
    degenerate: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.std)):
            raise InputError("normalization stats must be finite")
        if self.std < 0:
            raise InputError("std must be non-negative")


@dataclass(frozen=True)
class CropTransform:
    """Maps source coordinates into the output frame: x' = (x - offset_x) * scale_x."""

    offset_x: int
    offset_y: int
    scale_x: float
    scale_y: float
    out_w: int
    out_h: int

    def __post_init__(self):
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise InputError("transform scales must be positive")
        if self.out_w < 1 or self.out_h < 1:
            raise InputError("transform output dims must be at least 1")

    def then_resize(self, out_w: int, out_h: int) -> "CropTransform":
        """Compose with a resize of the current output frame to out_w x out_h."""
        if out_w < 1 or out_h < 1:
            raise InputError("resize dims must be at least 1")
        return CropTransform(
            offset_x=self.offset_x,
            offset_y=self.offset_y,
            scale_x=self.scale_x * (out_w / self.out_w),
            scale_y=self.scale_y * (out_h / self.out_h),
            out_w=out_w,
            out_h=out_h,
        )

    def as_dict(self) -> dict:
        return {
            "offset_x": self.offset_x, "offset_y": self.offset_y,
            "scale_x": self.scale_x, "scale_y": self.scale_y,
            "out_w": self.out_w, "out_h": self.out_h,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CropTransform":
        try:
            return cls(
                offset_x=int(d["offset_x"]), offset_y=int(d["offset_y"]),
                scale_x=float(d["scale_x"]), scale_y=float(d["scale_y"]),
                out_w=int(d["out_w"]), out_h=int(d["out_h"]),
            )
        except KeyError as e:
            raise InputError(f"transform JSON missing key {e.args[0]!r}") from e


def lung_crop(image: ImagePlane, lung_mask: BinaryMask) -> tuple[ImagePlane, CropTransform]:
    """Zero everything outside the mask, crop to its tight bounding box."""
    if image.data.shape != lung_mask.data.shape:
        raise InputError(
            f"image is {image.width}x{image.height} but lung mask is "
            f"{lung_mask.width}x{lung_mask.height}"
        )
    ys, xs = np.nonzero(lung_mask.data)
    if ys.size == 0:
        raise InputError("lung mask is empty; upstream segmentation produced no lung pixels")
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    overlay = image.data * lung_mask.data
    cropped = ImagePlane(overlay[y0:y1, x0:x1])
    t = CropTransform(
        offset_x=x0, offset_y=y0, scale_x=1.0, scale_y=1.0,
        out_w=x1 - x0, out_h=y1 - y0,
    )
    return cropped, t


def _axis_sources_bilinear(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def _axis_sources_nearest(n_in: int, n_out: int) -> np.ndarray:
    idx = np.floor((np.arange(n_out) + 0.5) * (n_in / n_out)).astype(np.intp)
    return np.minimum(idx, n_in - 1)


def resize(image: ImagePlane, out_w: int, out_h: int, mode: str = "bilinear") -> ImagePlane:
    """Separable resample to exactly out_w x out_h."""
    if out_w < 1 or out_h < 1:
        raise InputError("resize dims must be at least 1")
    data = image.data
    h, w = data.shape
    if mode == "nearest":
        ry = _axis_sources_nearest(h, out_h)
        rx = _axis_sources_nearest(w, out_w)
        return ImagePlane(data[np.ix_(ry, rx)])
    if mode != "bilinear":
        raise InputError(f"unknown resize mode {mode!r}")
    y0, y1, fy = _axis_sources_bilinear(h, out_h)
    x0, x1, fx = _axis_sources_bilinear(w, out_w)
    # interpolate rows first, then columns
    top = data[y0, :] * (1.0 - fy)[:, None] + data[y1, :] * fy[:, None]
    out = top[:, x0] * (1.0 - fx)[None, :] + top[:, x1] * fx[None, :]
    return ImagePlane(out)


def resize_mask(mask: BinaryMask, out_w: int, out_h: int) -> BinaryMask:
    """Nearest-neighbor resample keeping values binary."""
    if out_w < 1 or out_h < 1:
        raise InputError("resize dims must be at least 1")
    ry = _axis_sources_nearest(mask.data.shape[0], out_h)
    rx = _axis_sources_nearest(mask.data.shape[1], out_w)
    return BinaryMask(mask.data[np.ix_(ry, rx)])


def saturate_contrast(image: ImagePlane, lo_pct: float = 1.0, hi_pct: float = 99.0) -> ImagePlane:
    """Clip at the lo/hi percentiles and rescale the result to [0, 1]."""
    if not (0.0 <= lo_pct < hi_pct <= 100.0):
        raise InputError(f"need 0 <= lo_pct < hi_pct <= 100, got {lo_pct}, {hi_pct}")
    data = image.data
    lo = float(np.percentile(data, lo_pct))
    hi = float(np.percentile(data, hi_pct))
    if hi == lo:
        warnings.warn("flat image: saturation percentiles coincide; output all zeros",
                      DegenerateWarning, stacklevel=2)
        return ImagePlane(np.zeros_like(data))
    return ImagePlane((np.clip(data, lo, hi) - lo) / (hi - lo))


def standardize(image: ImagePlane) -> tuple[ImagePlane, NormalizationStats]:
    """Shift/scale to zero mean and unit population standard deviation."""
    data = image.data
    mu = float(data.mean())
    sigma = float(data.std())  # population convention (ddof=0)
    if sigma == 0.0:
        warnings.warn("constant image: standard deviation is zero; output all zeros",
                      DegenerateWarning, stacklevel=2)
        return ImagePlane(np.zeros_like(data)), NormalizationStats(mean=mu, std=0.0, degenerate=True)
    return ImagePlane((data - mu) / sigma), NormalizationStats(mean=mu, std=sigma)


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def rescale_boxes(boxes: list[BoundingBox], t: CropTransform) -> list[BoundingBox]:
    """Carry boxes through a crop/resize transform.

    Both corners are mapped and rounded to the nearest integer, then clipped
    to the output frame. Boxes with no remaining area are dropped with a
    warning naming the source box.
    """
    out: list[BoundingBox] = []
    for b in boxes:
        x0 = _round_half_up((b.x - t.offset_x) * t.scale_x)
        y0 = _round_half_up((b.y - t.offset_y) * t.scale_y)
        x1 = _round_half_up((b.x + b.w - t.offset_x) * t.scale_x)
        y1 = _round_half_up((b.y + b.h - t.offset_y) * t.scale_y)
        x0c, x1c = max(x0, 0), min(x1, t.out_w)
        y0c, y1c = max(y0, 0), min(y1, t.out_h)
        if x1c <= x0c or y1c <= y0c:
            warnings.warn(
                f"box ({b.x}, {b.y}, {b.w}, {b.h}) has no area in the output frame; dropped",
                DroppedItemWarning, stacklevel=2,
            )
            continue
        out.append(BoundingBox(x=x0c, y=y0c, w=x1c - x0c, h=y1c - y0c))
    return out


def preprocess_chain(
    image: ImagePlane,
    lung_mask: BinaryMask,
    size: int = 256,
    lo_pct: float = 1.0,
    hi_pct: float = 99.0,
) -> tuple[ImagePlane, CropTransform, NormalizationStats]:
    """crop -> resize -> saturate/[0,1] -> standardize, with the box transform."""
    cropped, t = lung_crop(image, lung_mask)
    resized = resize(cropped, size, size, mode="bilinear")
    t = t.then_resize(size, size)
    saturated = saturate_contrast(resized, lo_pct, hi_pct)
    final, stats = standardize(saturated)
    return final, t, stats
