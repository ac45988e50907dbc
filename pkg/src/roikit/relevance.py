"""Class-relevance maps from exported features, and heat-map vectorization.

crm scores each spatial cell of a feature stack by how much zeroing it would
move the classifier head's outputs: with s_k the GAP-plus-dense score of
class k and s_k' the same score after zeroing one cell (the GAP divisor
stays H*W), the raw relevance at that cell is the sum over classes of
(s_k - s_k')^2, then min-max normalized.

heat_to_mask turns a relevance map into a binary mask and closed polygons:
threshold, drop small components, trace each remaining component boundary
clockwise (Moore neighborhood, start at the topmost-then-leftmost pixel,
stop on the first repeat of the initial move from the start pixel), collapse
collinear runs into vertices, then rasterize the polygons back: boundary
pixels are drawn and the interior recovered by flooding the background
4-connectedly from outside the frame. For simply connected components the
round trip reproduces the thresholded pixels exactly; holes are filled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import BinaryMask, ProbabilityMap, label_components
from .errors import DroppedItemWarning, InputError
from .manifest import DatasetManifest, ManifestEntry

__all__ = [
    "FeatureStack",
    "DenseHead",
    "RelevanceMap",
    "WeakMaskParams",
    "crm",
    "upscale_relevance",
    "trace_boundary",
    "chain_to_polygon",
    "rasterize_polygons",
    "heat_to_mask",
    "build_weak_pairs",
]


@dataclass(frozen=True)
class FeatureStack:
    """H x W x C activations from the deepest convolutional layer."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] < 1:
            raise InputError(f"feature stack must be H x W x C, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("feature stack contains non-finite values")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class DenseHead:
    """GAP head: weights C x K, bias K."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise InputError(f"head weights must be C x K, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[1]:
            raise InputError("head bias length must equal the class count")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("head parameters contain non-finite values")
        w = np.ascontiguousarray(w)
        b = np.ascontiguousarray(b)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def classes(self) -> int:
        return self.weights.shape[1]

    def scores(self, features: FeatureStack) -> np.ndarray:
        """bias_k + sum_c w_ck * GAP(f_c), one score per class."""
        if features.channels != self.weights.shape[0]:
            raise InputError(
                f"feature stack has {features.channels} channels but head expects "
                f"{self.weights.shape[0]}"
            )
        gap = features.values.mean(axis=(0, 1))
        return self.bias + gap @ self.weights


@dataclass(frozen=True)
class RelevanceMap:
    normalized: ProbabilityMap
    raw: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.float64)
        if raw.shape != self.normalized.data.shape:
            raise InputError("raw plane dimensions must match the normalized map")
        raw = np.ascontiguousarray(raw)
        raw.setflags(write=False)
        object.__setattr__(self, "raw", raw)

    @classmethod
    def from_normalized(cls, data: np.ndarray) -> "RelevanceMap":
        return cls(normalized=ProbabilityMap(data), raw=np.asarray(data, dtype=np.float64))


def _normalize(raw: np.ndarray) -> np.ndarray:
    lo = float(raw.min())
    hi = float(raw.max())
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def crm(features: FeatureStack, head: DenseHead, classes: list[int] | None = None) -> RelevanceMap:
    """Squared score increments from zeroing each cell, summed over classes.

    Zeroing cell (x, y) shifts class k's score by sum_c w_ck f_c(x,y) / (H*W),
    so the raw map is computable in one projection without re-running the head.
    classes selects a subset of output nodes; default sums over all of them.
    """
    if features.channels != head.weights.shape[0]:
        raise InputError(
            f"feature stack has {features.channels} channels but head expects "
            f"{head.weights.shape[0]}"
        )
    w = head.weights
    if classes is not None:
        if not classes:
            raise InputError("class subset must be non-empty")
        for k in classes:
            if not (0 <= k < head.classes):
                raise InputError(f"class index {k} outside [0, {head.classes})")
        w = w[:, list(classes)]
    area = features.height * features.width
    increments = (features.values @ w) / area
    raw = np.einsum("hwk,hwk->hw", increments, increments)
    return RelevanceMap(normalized=ProbabilityMap(_normalize(raw)), raw=raw)


def _bilinear(plane: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = plane.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    top = plane[y0, :] * (1.0 - fy) + plane[y1, :] * fy
    return top[:, x0] * (1.0 - fx) + top[:, x1] * fx


def upscale_relevance(rmap: RelevanceMap, out_w: int, out_h: int) -> RelevanceMap:
    """Bilinear upsample, then re-stretch to [0, 1] (flat maps pass through)."""
    if out_w < 1 or out_h < 1:
        raise InputError("upscale dims must be at least 1")
    up = _bilinear(rmap.normalized.data, out_w, out_h)
    raw_up = _bilinear(rmap.raw, out_w, out_h)
    lo, hi = float(up.min()), float(up.max())
    if hi > lo:
        up = (up - lo) / (hi - lo)
    return RelevanceMap(normalized=ProbabilityMap(np.clip(up, 0.0, 1.0)), raw=raw_up)


# Moore neighborhood in clockwise screen order (x right, y down)
_CW = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_CW_INDEX = {d: i for i, d in enumerate(_CW)}


def trace_boundary(component: np.ndarray) -> list[tuple[int, int]]:
    """Clockwise Moore boundary walk of one foreground component.

    Returns the closed pixel chain (first pixel not repeated at the end).
    Start pixel is the topmost-then-leftmost foreground pixel; the walk stops
    when the initial move out of the start pixel is about to repeat.
    """
    fg = np.asarray(component, dtype=bool)
    ys, xs = np.nonzero(fg)
    if ys.size == 0:
        raise InputError("cannot trace an empty component")
    h, w = fg.shape
    sy = int(ys.min())
    sx = int(xs[ys == sy].min())

    def is_fg(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and bool(fg[y, x])

    chain: list[tuple[int, int]] = [(sx, sy)]
    cx, cy = sx, sy
    bx, by = sx - 1, sy  # backtrack: to the left of the raster-first pixel
    first_move: tuple[int, int] | None = None
    while True:
        bdir = _CW_INDEX[(bx - cx, by - cy)]
        move: tuple[int, int] | None = None
        for k in range(1, 9):
            d = (bdir + k) % 8
            nx, ny = cx + _CW[d][0], cy + _CW[d][1]
            if is_fg(nx, ny):
                move = (nx, ny)
                px, py = _CW[(d - 1) % 8]
                bx, by = cx + px, cy + py
                break
        if move is None:
            break  # isolated pixel
        if first_move is None:
            first_move = move
        elif (cx, cy) == (sx, sy) and move == first_move:
            break  # the walk is about to repeat itself: cycle complete
        cx, cy = move
        chain.append(move)
    if len(chain) > 1 and chain[-1] == chain[0]:
        chain.pop()
    return chain


def chain_to_polygon(chain: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Collapse collinear runs of a closed chain into polygon vertices."""
    n = len(chain)
    if n <= 2:
        return list(chain)
    verts: list[tuple[int, int]] = []
    for i in range(n):
        px, py = chain[(i - 1) % n]
        cx, cy = chain[i]
        nx, ny = chain[(i + 1) % n]
        if (cx - px, cy - py) != (nx - cx, ny - cy):
            verts.append((cx, cy))
    return verts if verts else [chain[0]]


def _draw_segment(grid: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> None:
    # Bresenham; the tracer only emits axis-aligned or diagonal segments,
    # for which this walks the exact lattice points of the line
    x0, y0 = a
    x1, y1 = b
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        grid[y0, x0] = 1
        if (x0, y0) == (x1, y1):
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize_polygons(polys: list[list[tuple[int, int]]], width: int, height: int) -> BinaryMask:
    """Draw closed polygon outlines and fill their interiors.

    Interior recovery floods the background 4-connectedly from outside a
    1-pixel pad; anything the flood cannot reach is foreground, so holes of
    the original region are filled.
    """
    if width < 1 or height < 1:
        raise InputError("frame dims must be at least 1")
    wall = np.zeros((height, width), dtype=np.uint8)
    for poly in polys:
        if not poly:
            raise InputError("empty polygon")
        for x, y in poly:
            if not (0 <= x < width and 0 <= y < height):
                raise InputError(f"polygon vertex ({x}, {y}) outside the {width}x{height} frame")
        for a, b in zip(poly, poly[1:] + poly[:1]):
            _draw_segment(wall, a, b)
    padded = np.pad(wall, 1)
    four = ndimage.generate_binary_structure(2, 1)
    labels, _ = ndimage.label(padded == 0, structure=four)
    outside = labels[0, 0]
    filled = (labels != outside).astype(np.uint8)
    return BinaryMask(filled[1:-1, 1:-1])


def heat_to_mask(
    heat: RelevanceMap | ProbabilityMap,
    threshold: float = 0.5,
    connectivity: int = 8,
    min_area: int = 16,
) -> tuple[BinaryMask, list[list[tuple[int, int]]]]:
    """Binarize, drop small components, vectorize, rasterize back."""
    if not (0.0 < threshold < 1.0):
        raise InputError(f"threshold must lie in (0, 1), got {threshold}")
    if min_area < 1:
        raise InputError("min_area must be at least 1")
    pmap = heat.normalized if isinstance(heat, RelevanceMap) else heat
    binary = pmap.threshold(threshold)
    labels, n = label_components(binary, connectivity)
    polys: list[list[tuple[int, int]]] = []
    for k in range(1, n + 1):
        comp = labels == k
        if int(np.count_nonzero(comp)) < min_area:
            continue
        polys.append(chain_to_polygon(trace_boundary(comp)))
    h, w = binary.data.shape
    if not polys:
        return BinaryMask(np.zeros((h, w), dtype=np.uint8)), []
    return rasterize_polygons(polys, w, h), polys


@dataclass(frozen=True)
class WeakMaskParams:
    threshold: float = 0.5
    min_area: int = 16
    connectivity: int = 8

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise InputError("threshold must lie in (0, 1)")
        if self.min_area < 1:
            raise InputError("min_area must be at least 1")
        if self.connectivity not in (4, 8):
            raise InputError("connectivity must be 4 or 8")


def build_weak_pairs(
    manifest: DatasetManifest,
    relevance_dir: str | Path,
    out_dir: str | Path,
    params: WeakMaskParams = WeakMaskParams(),
) -> DatasetManifest:
    """Pair each positive image with a mask generated from its relevance map.

    Relevance maps are looked up as <relevance_dir>/<image stem>.pfm; masks
    are written to <out_dir>/<image stem>_weak.png. Entries whose map is
    missing are skipped with a warning. All emitted entries carry
    split=train and source=weak.
    """
    from .fileio import read_image, write_mask_png

    relevance_dir = Path(relevance_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    negative = {"", "0", "negative", "neg", "false", "no"}
    entries: list[ManifestEntry] = []
    for e in manifest.entries:
        if e.label.strip().lower() in negative:
            continue
        stem = Path(e.image).stem
        heat_path = relevance_dir / f"{stem}.pfm"
        if not heat_path.exists():
            warnings.warn(f"no relevance map for {e.image!r}; entry skipped",
                          DroppedItemWarning, stacklevel=2)
            continue
        heat = read_image(heat_path)
        pmap = ProbabilityMap(np.clip(heat.data, 0.0, 1.0))
        mask, _ = heat_to_mask(pmap, params.threshold, params.connectivity, params.min_area)
        mask_path = out_dir / f"{stem}_weak.png"
        write_mask_png(mask, str(mask_path))
        entries.append(ManifestEntry(
            image=e.image, mask=str(mask_path), label=e.label,
            patient=e.patient, split="train", source="weak",
        ))
    return DatasetManifest(tuple(entries))
