"""Seeded affine augmentation and training-manifest assembly.

Augmentation parameters are drawn from a counter-based generator keyed by
(seed, index), so sample i of a run is reproducible regardless of iteration
order or worker count. The flip, rotation, and shift compose into a single
affine map applied once per plane: bilinear with zero fill for the image,
nearest with zero fill for the mask, which therefore stays binary.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import BinaryMask, ImagePlane
from .errors import InputError
from .manifest import DatasetManifest, ManifestEntry

__all__ = [
    "AugmentSpec",
    "augment_pair",
    "augment_image",
    "augment_manifest",
    "split_manifest",
    "assemble_at",
]


@dataclass(frozen=True)
class AugmentSpec:
    hflip_prob: float = 0.5
    max_shift_frac: float = 0.05
    max_rotate_deg: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.hflip_prob <= 1.0):
            raise InputError("hflip_prob must lie in [0, 1]")
        if not (0.0 <= self.max_shift_frac <= 0.5):
            raise InputError("max_shift_frac must lie in [0, 0.5]")
        if self.max_rotate_deg < 0:
            raise InputError("max_rotate_deg must be non-negative")

    def as_dict(self) -> dict:
        return {
            "hflip_prob": self.hflip_prob,
            "max_shift_frac": self.max_shift_frac,
            "max_rotate_deg": self.max_rotate_deg,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        known = {"hflip_prob", "max_shift_frac", "max_rotate_deg", "seed"}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown augmentation spec keys: {sorted(extra)}")
        return cls(**{k: d[k] for k in known & set(d)})


def _draw_params(spec: AugmentSpec, index: int, width: int, height: int):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(spec.seed, index)))
    flip = bool(rng.random() < spec.hflip_prob)
    shift_x = float(rng.uniform(-spec.max_shift_frac, spec.max_shift_frac) * width)
    shift_y = float(rng.uniform(-spec.max_shift_frac, spec.max_shift_frac) * height)
    angle = float(np.deg2rad(rng.uniform(-spec.max_rotate_deg, spec.max_rotate_deg)))
    return flip, shift_x, shift_y, angle


def _inverse_affine(flip: bool, shift_x: float, shift_y: float, angle: float,
                    width: int, height: int) -> np.ndarray:
    """Homogeneous 3x3 map from output (x, y) back to input (x, y).

    Forward order is flip, then rotate about the pixel-center of the frame,
    then shift; the inverse composes the inverted steps in reverse.
    """
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    unshift = np.array([[1.0, 0.0, -shift_x],
                        [0.0, 1.0, -shift_y],
                        [0.0, 0.0, 1.0]])
    c, s = np.cos(angle), np.sin(angle)
    # R(-angle) about (cx, cy)
    unrotate = np.array([[c, s, cx - c * cx - s * cy],
                         [-s, c, cy + s * cx - c * cy],
                         [0.0, 0.0, 1.0]])
    h = unrotate @ unshift
    if flip:
        unflip = np.array([[-1.0, 0.0, width - 1.0],
                           [0.0, 1.0, 0.0],
                           [0.0, 0.0, 1.0]])
        h = unflip @ h
    return h


def _apply(plane: np.ndarray, h: np.ndarray, order: int) -> np.ndarray:
    # scipy works in (row, col); swap the (x, y) map accordingly
    matrix = np.array([[h[1, 1], h[1, 0]],
                       [h[0, 1], h[0, 0]]])
    offset = (h[1, 2], h[0, 2])
    return ndimage.affine_transform(
        plane, matrix, offset=offset, output_shape=plane.shape,
        order=order, mode="constant", cval=0.0, prefilter=False,
    )


def augment_pair(
    image: ImagePlane,
    mask: BinaryMask,
    spec: AugmentSpec,
    index: int,
) -> tuple[ImagePlane, BinaryMask]:
    """One reproducible augmented copy of an (image, mask) pair."""
    if image.data.shape != mask.data.shape:
        raise InputError(
            f"image is {image.width}x{image.height} but mask is {mask.width}x{mask.height}"
        )
    if index < 0:
        raise InputError("index must be non-negative")
    h_, w_ = image.data.shape
    flip, sx, sy, angle = _draw_params(spec, index, w_, h_)
    h3 = _inverse_affine(flip, sx, sy, angle, w_, h_)
    out_img = _apply(image.data, h3, order=1)
    out_mask = _apply(mask.data, h3, order=0)
    return ImagePlane(out_img), BinaryMask(out_mask)


def augment_image(image: ImagePlane, spec: AugmentSpec, index: int) -> ImagePlane:
    """Image-only variant for entries that carry no mask."""
    if index < 0:
        raise InputError("index must be non-negative")
    h_, w_ = image.data.shape
    flip, sx, sy, angle = _draw_params(spec, index, w_, h_)
    h3 = _inverse_affine(flip, sx, sy, angle, w_, h_)
    return ImagePlane(_apply(image.data, h3, order=1))


def augment_manifest(
    manifest: DatasetManifest,
    spec: AugmentSpec,
    repeat: int,
    out_dir: str | Path,
) -> DatasetManifest:
    """Write `repeat` augmented copies of every train entry.

    Copy r of entry i uses counter index i * repeat + r. Images are written
    as PFM, masks as PNG, into out_dir; the returned manifest carries the
    original entries followed by the augmented ones tagged source=aug.
    """
    from .fileio import read_image, read_mask_png, write_mask_png, write_pfm

    if repeat < 1:
        raise InputError("repeat must be at least 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    new_entries: list[ManifestEntry] = list(manifest.entries)
    for i, e in enumerate(manifest.entries):
        if e.split != "train":
            continue
        image = read_image(e.image)
        mask = read_mask_png(e.mask) if e.mask else None
        stem = Path(e.image).stem
        for r in range(repeat):
            idx = i * repeat + r
            if mask is not None:
                aug_img, aug_mask = augment_pair(image, mask, spec, idx)
            else:
                aug_img = augment_image(image, spec, idx)
                aug_mask = None
            img_path = out_dir / f"{stem}_aug{r}.pfm"
            write_pfm(aug_img.data, str(img_path))
            mask_path = ""
            if aug_mask is not None:
                mask_path = str(out_dir / f"{stem}_aug{r}.png")
                write_mask_png(aug_mask, mask_path)
            new_entries.append(ManifestEntry(
                image=str(img_path), mask=mask_path, label=e.label,
                patient=e.patient, split="train", source="aug",
            ))
    return DatasetManifest(tuple(new_entries))


def split_manifest(manifest: DatasetManifest, val_frac: float, seed: int) -> DatasetManifest:
    """Patient-level train/val split, deterministic under the seed.

    Test entries pass through untouched. The sorted unique patients of the
    train+val pool are shuffled; whole patients move into the validation set
    until it reaches val_frac of the pool's entries, so the achieved fraction
    overshoots by at most one patient. At least one patient stays on each
    side.
    """
    if not (0.0 < val_frac < 1.0):
        raise InputError("val_frac must lie in (0, 1)")
    pool = [e for e in manifest.entries if e.split != "test"]
    if not pool:
        raise InputError("no train/val entries to split")
    # sorted so the assignment depends only on the patient-id set and seed,
    # not on entry order
    patients = sorted({e.patient for e in pool})
    if len(patients) < 2:
        raise InputError("patient-level split needs at least 2 patients")

    rng = np.random.default_rng(seed)
    order = [patients[i] for i in rng.permutation(len(patients))]
    per_patient = {p: 0 for p in patients}
    for e in pool:
        per_patient[e.patient] += 1
    target = val_frac * len(pool)
    val_patients: set[str] = set()
    val_count = 0
    for p in order:
        if val_count >= target:
            break
        if len(val_patients) >= len(patients) - 1:
            break  # keep at least one training patient
        val_patients.add(p)
        val_count += per_patient[p]

    entries = []
    for e in manifest.entries:
        if e.split == "test":
            entries.append(e)
        else:
            split = "val" if e.patient in val_patients else "train"
            entries.append(ManifestEntry(
                image=e.image, mask=e.mask, label=e.label,
                patient=e.patient, split=split, source=e.source,
            ))
    return DatasetManifest(tuple(entries))


def assemble_at(base: DatasetManifest, weak: DatasetManifest) -> DatasetManifest:
    """Concatenate the base manifest with weak-pair entries.

    Weak entries must all be training entries; every (image, mask) path pair
    must be unique across the union. Weak entries are tagged source=weak,
    base entries keep their existing tags.
    """
    for e in weak.entries:
        if e.split != "train":
            raise InputError(
                f"weak entry {e.image!r} has split={e.split!r}; only train entries are allowed"
            )
    combined: list[ManifestEntry] = list(base.entries)
    for e in weak.entries:
        combined.append(ManifestEntry(
            image=e.image, mask=e.mask, label=e.label,
            patient=e.patient, split="train", source="weak",
        ))
    seen: set[tuple[str, str]] = set()
    for e in combined:
        key = (e.image, e.mask)
        if key in seen:
            raise InputError(f"duplicate manifest entry for image {e.image!r} mask {e.mask!r}")
        seen.add(key)
    return DatasetManifest(tuple(combined))
