"""VIA annotation ingestion and multi-rater consensus.

Reads VGG Image Annotator project JSON (flat or wrapped in
_via_img_metadata), keeping only rectangular regions. pipeline_consensus
turns several such exports into per-image consensus masks: each rater's
boxes are rasterized, the masks fused, and the posterior thresholded. An
image missing from one rater's file counts as that rater seeing only
background there; it is reported, not dropped.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .core import BinaryMask, BoundingBox, ProbabilityMap, boxes_to_mask
from .errors import DroppedItemWarning, InputError
from .staple import RaterPerformance, StapleProblem, consensus_boxes, consensus_mask, staple_fuse

__all__ = [
    "import_via",
    "export_via",
    "ConsensusResult",
    "pipeline_consensus",
]

BoxMap = dict[str, list[BoundingBox]]


def _load_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object at top level")
    return doc


def _coerce_coord(value, what: str, filename: str) -> int:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise InputError(f"{filename}: region {what} is not numeric: {value!r}")
    v = int(round(value))
    if v < 0:
        raise InputError(f"{filename}: region {what} is negative: {value}")
    return v


def import_via(path: str | Path) -> BoxMap:
    """Per-image rectangle lists from a VIA project export.

    Non-rectangular regions are skipped with a warning. Images annotated
    with no regions stay in the map with an empty list.
    """
    doc = _load_json(path)
    if "_via_img_metadata" in doc:
        meta = doc["_via_img_metadata"]
        if not isinstance(meta, dict):
            raise InputError(f"{path}: _via_img_metadata is not an object")
    else:
        meta = doc
    out: BoxMap = {}
    for key, entry in meta.items():
        if not isinstance(entry, dict) or "filename" not in entry:
            raise InputError(f"{path}: entry {key!r} lacks a filename")
        filename = str(entry["filename"])
        regions = entry.get("regions", [])
        if regions is None:
            regions = []
        if not isinstance(regions, list):
            raise InputError(f"{path}: regions of {filename!r} is not a list")
        boxes: list[BoundingBox] = []
        for i, region in enumerate(regions):
            shape = region.get("shape_attributes", {}) if isinstance(region, dict) else {}
            name = shape.get("name")
            if name != "rect":
                warnings.warn(
                    f"{filename}: region {i} has shape {name!r}, only rectangles are used; skipped",
                    DroppedItemWarning, stacklevel=2,
                )
                continue
            x = _coerce_coord(shape.get("x"), f"{i} x", filename)
            y = _coerce_coord(shape.get("y"), f"{i} y", filename)
            w = int(round(shape.get("width", 0)))
            h = int(round(shape.get("height", 0)))
            if w <= 0 or h <= 0:
                raise InputError(f"{filename}: region {i} has non-positive size {w}x{h}")
            boxes.append(BoundingBox(x=x, y=y, w=w, h=h))
        out[filename] = boxes
    return out


def export_via(box_map: BoxMap) -> dict:
    """Flat VIA metadata object whose import round-trips to the same map."""
    out: dict = {}
    for filename, boxes in box_map.items():
        regions = [
            {
                "shape_attributes": {
                    "name": "rect",
                    "x": b.x, "y": b.y, "width": b.w, "height": b.h,
                },
                "region_attributes": {},
            }
            for b in boxes
        ]
        out[f"{filename}-1"] = {
            "filename": filename,
            "size": -1,
            "regions": regions,
            "file_attributes": {},
        }
    return out


@dataclass(frozen=True)
class ConsensusResult:
    mask: BinaryMask
    boxes: tuple[BoundingBox, ...]
    posterior: ProbabilityMap
    performance: tuple[RaterPerformance, ...]
    iterations: int
    converged: bool
    missing_raters: tuple[int, ...]


def pipeline_consensus(
    via_files: list[str | Path],
    frame: tuple[int, int] | dict[str, tuple[int, int]],
    threshold: float = 0.5,
    prior: float | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> dict[str, ConsensusResult]:
    """Fuse the raters of several VIA exports image by image.

    frame is one (width, height) for all images or a per-image-id dict.
    Raters appear in via_files order; an image absent from a rater's file is
    treated as an all-background decision by that rater and recorded in
    missing_raters.
    """
    if len(via_files) < 2:
        raise InputError("consensus needs at least 2 rater files")
    maps = [import_via(p) for p in via_files]
    image_ids: list[str] = []
    seen: set[str] = set()
    for m in maps:
        for name in m:
            if name not in seen:
                seen.add(name)
                image_ids.append(name)

    results: dict[str, ConsensusResult] = {}
    for name in image_ids:
        if isinstance(frame, dict):
            if name not in frame:
                raise InputError(f"no frame size given for image {name!r}")
            w, h = frame[name]
        else:
            w, h = frame
        rater_masks: list[BinaryMask] = []
        missing: list[int] = []
        for r, m in enumerate(maps):
            if name in m:
                rater_masks.append(boxes_to_mask(m[name], w, h))
            else:
                missing.append(r)
                warnings.warn(
                    f"image {name!r} missing from rater file {via_files[r]}; "
                    "treated as an all-background decision",
                    DroppedItemWarning, stacklevel=2,
                )
                rater_masks.append(boxes_to_mask([], w, h))
        problem = StapleProblem.from_masks(rater_masks, prior=prior, tol=tol, max_iter=max_iter)
        result = staple_fuse(problem)
        results[name] = ConsensusResult(
            mask=consensus_mask(result, threshold),
            boxes=tuple(consensus_boxes(result, threshold)),
            posterior=result.posterior_map(),
            performance=result.performance,
            iterations=result.iterations,
            converged=result.converged,
            missing_raters=tuple(missing),
        )
    return results
