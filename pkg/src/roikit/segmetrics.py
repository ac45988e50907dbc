"""Segmentation evaluation: pixel confusion, IOU/Dice, instance AP.

Two layers. The pixel layer tallies a confusion matrix between binary masks
and derives IOU, Dice, precision, and recall with explicit zero-denominator
policy (vacuous agreement reads as 1, a one-sided miss as 0, both flagged).
The instance layer extracts scored connected components from a probability
map, matches them greedily against ground-truth regions at an IOU threshold,
and integrates the precision envelope over recall for average precision,
averaged over thresholds 0.50 to 0.95 in 0.05 steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, BoundingBox, ConfusionCounts, ProbabilityMap, box_iou, label_components
from .errors import DegenerateWarning, InputError, NumericalError

__all__ = [
    "InstanceDetection",
    "PRCurve",
    "ApConfig",
    "pixel_confusion",
    "iou",
    "dice",
    "precision",
    "recall",
    "seg_scores",
    "dice_from_iou",
    "region_iou",
    "extract_instances",
    "greedy_match_flags",
    "curve_from_flags",
    "match_instances",
    "average_precision",
    "ap_per_threshold",
    "ap_range",
]

# built from integer ratios so e.g. 0.70 is the float literal 0.7 exactly
DEFAULT_IOU_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))

Region = BinaryMask | BoundingBox


@dataclass(frozen=True)
class InstanceDetection:
    region: Region
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise InputError(f"detection score must lie in [0, 1], got {self.score}")
        if isinstance(self.region, BinaryMask) and self.region.foreground_count() == 0:
            raise InputError("detection region mask has no foreground pixels")


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) pairs in sweep order over descending score."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev_r = 0.0
        for r, p in self.points:
            if not (0.0 <= r <= 1.0 and 0.0 <= p <= 1.0):
                raise InputError(f"PR point ({r}, {p}) outside the unit square")
            if r < prev_r:
                raise InputError("recalls must be non-decreasing along the curve")
            prev_r = r

    def recalls(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    def precisions(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


@dataclass(frozen=True)
class ApConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    binarize_threshold: float = 0.5
    min_component_area: int = 1

    def __post_init__(self):
        ts = tuple(float(t) for t in self.iou_thresholds)
        if not ts:
            raise InputError("at least one IOU threshold is required")
        for t in ts:
            if not (0.0 < t <= 1.0):
                raise InputError(f"IOU threshold {t} must lie in (0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InputError("IOU thresholds must be strictly increasing")
        object.__setattr__(self, "iou_thresholds", ts)
        if not (0.0 < self.binarize_threshold <= 1.0):
            raise InputError("binarize_threshold must lie in (0, 1]")
        if self.min_component_area < 1:
            raise InputError("min_component_area must be at least 1")


def pixel_confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    """Per-pixel tallies; tp+fp+fn+tn equals the pixel count."""
    if pred.data.shape != gt.data.shape:
        raise InputError(
            f"pred is {pred.width}x{pred.height} but gt is {gt.width}x{gt.height}"
        )
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _ratio(num: int, den: int, vacuous: bool, what: str) -> float:
    if den > 0:
        return num / den
    if vacuous:
        warnings.warn(f"{what}: no relevant pixels on either side; read as 1", DegenerateWarning, stacklevel=3)
        return 1.0
    warnings.warn(f"{what}: empty denominator against non-empty reference; read as 0", DegenerateWarning, stacklevel=3)
    return 0.0


def iou(counts: ConfusionCounts) -> float:
    """TP / (TP + FP + FN)."""
    vac = counts.tp == 0 and counts.fp == 0 and counts.fn == 0
    return _ratio(counts.tp, counts.tp + counts.fp + counts.fn, vac, "iou")


def dice(counts: ConfusionCounts) -> float:
    """2 TP / (2 TP + FP + FN)."""
    vac = counts.tp == 0 and counts.fp == 0 and counts.fn == 0
    return _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn, vac, "dice")


def precision(counts: ConfusionCounts) -> float:
    """TP / (TP + FP); empty prediction is vacuous only against empty GT."""
    vac = counts.tp + counts.fp == 0 and counts.fn == 0
    return _ratio(counts.tp, counts.tp + counts.fp, vac, "precision")


def recall(counts: ConfusionCounts) -> float:
    """TP / (TP + FN); empty GT is vacuous only against empty prediction."""
    vac = counts.tp + counts.fn == 0 and counts.fp == 0
    return _ratio(counts.tp, counts.tp + counts.fn, vac, "recall")


def seg_scores(counts: ConfusionCounts) -> dict[str, float]:
    return {
        "iou": iou(counts),
        "dice": dice(counts),
        "precision": precision(counts),
        "recall": recall(counts),
    }


def dice_from_iou(j: float) -> float:
    """2J/(1+J): the Dice value any confusion matrix with IOU J must have."""
    if not (0.0 <= j <= 1.0):
        raise InputError(f"IOU must lie in [0, 1], got {j}")
    return 2.0 * j / (1.0 + j)


def _mask_box_intersection(mask: BinaryMask, box: BoundingBox) -> int:
    x0 = min(box.x, mask.width)
    y0 = min(box.y, mask.height)
    x1 = min(box.x + box.w, mask.width)
    y1 = min(box.y + box.h, mask.height)
    if x1 <= x0 or y1 <= y0:
        return 0
    return int(mask.data[y0:y1, x0:x1].sum())


def region_iou(a: Region, b: Region) -> float:
    """IOU between two pixel sets, each a mask or a half-open box."""
    if isinstance(a, BoundingBox) and isinstance(b, BoundingBox):
        return box_iou(a, b)
    if isinstance(a, BinaryMask) and isinstance(b, BinaryMask):
        if a.data.shape != b.data.shape:
            raise InputError("mask regions must share one frame to intersect")
        inter = int(np.count_nonzero(a.data.astype(bool) & b.data.astype(bool)))
        union = a.foreground_count() + b.foreground_count() - inter
        return inter / union if union else 0.0
    mask, box = (a, b) if isinstance(a, BinaryMask) else (b, a)
    inter = _mask_box_intersection(mask, box)
    union = mask.foreground_count() + box.area - inter
    return inter / union if union else 0.0


def extract_instances(pred: ProbabilityMap, config: ApConfig = ApConfig()) -> list[InstanceDetection]:
    """Scored connected components of the thresholded map.

    Score is the mean probability over the component's pixels; components
    smaller than min_component_area are dropped. Sorted by descending score;
    ties keep component raster order.
    """
    binary = pred.threshold(config.binarize_threshold)
    labels, n = label_components(binary)
    out: list[InstanceDetection] = []
    for k in range(1, n + 1):
        sel = labels == k
        area = int(np.count_nonzero(sel))
        if area < config.min_component_area:
            continue
        region = BinaryMask(sel.astype(np.uint8))
        score = float(pred.data[sel].mean())
        out.append(InstanceDetection(region=region, score=score))
    out.sort(key=lambda d: -d.score)
    return out


def greedy_match_flags(
    dets: list[InstanceDetection],
    gts: list[Region],
    iou_threshold: float,
) -> list[tuple[float, bool]]:
    """(score, matched) per detection in descending-score order.

    A detection claims the unmatched GT of maximal IOU when that IOU clears
    the threshold (first such GT on ties); otherwise it stays unmatched.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise InputError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    matched = [False] * len(gts)
    flags: list[tuple[float, bool]] = []
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(gts):
            if matched[j]:
                continue
            v = region_iou(dets[i].region, gt)
            if v > best_iou:
                best_iou = v
                best_j = j
        hit = best_j >= 0 and best_iou >= iou_threshold
        if hit:
            matched[best_j] = True
        flags.append((dets[i].score, hit))
    return flags


def curve_from_flags(flags: list[tuple[float, bool]], n_gt: int) -> PRCurve:
    """PR points from descending-score (score, matched) records."""
    tp = fp = 0
    points: list[tuple[float, float]] = []
    for _, hit in flags:
        if hit:
            tp += 1
        else:
            fp += 1
        r = tp / n_gt if n_gt else 0.0
        points.append((r, tp / (tp + fp)))
    return PRCurve(tuple(points))


def match_instances(
    dets: list[InstanceDetection],
    gts: list[Region],
    iou_threshold: float,
) -> tuple[ConfusionCounts, PRCurve]:
    """Greedy descending-score matching against unmatched GT regions.

    Unclaimed GT are false negatives; one PR point is emitted per detection.
    """
    flags = greedy_match_flags(dets, gts, iou_threshold)
    tp = sum(1 for _, hit in flags if hit)
    fp = len(flags) - tp
    return ConfusionCounts(tp=tp, fp=fp, fn=len(gts) - tp), curve_from_flags(flags, len(gts))


def average_precision(curve: PRCurve) -> float:
    """All-points integration of the precision envelope over recall."""
    if not curve.points:
        return 0.0
    rec = curve.recalls()
    prec = curve.precisions()
    # envelope: max precision over all points at >= this recall
    env = np.maximum.accumulate(prec[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(rec, env):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def ap_per_threshold(
    dets: list[InstanceDetection],
    gts: list[Region],
    config: ApConfig = ApConfig(),
) -> dict[float, float]:
    """AP at each configured IOU threshold; requires at least one GT region."""
    if not gts:
        raise NumericalError("average precision is undefined with no ground-truth regions")
    out: dict[float, float] = {}
    for t in config.iou_thresholds:
        _, curve = match_instances(dets, gts, t)
        out[t] = average_precision(curve)
    return out


def ap_range(
    dets: list[InstanceDetection],
    gts: list[Region],
    config: ApConfig = ApConfig(),
) -> float:
    """Unweighted mean of AP over the configured thresholds."""
    per = ap_per_threshold(dets, gts, config)
    return float(sum(per.values()) / len(per))
