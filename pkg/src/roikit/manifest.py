"""Dataset manifests: ordered (image, mask/boxes, label, patient, split) records.

CSV wire format: header ``image,mask,label,patient,split`` with an optional
trailing ``source`` column carrying provenance (base vs weak) for augmented
training manifests.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import InputError
from .fileio import atomic_write_text

VALID_SPLITS = ("train", "val", "test")

__all__ = ["ManifestEntry", "DatasetManifest", "read_manifest_csv", "write_manifest_csv"]


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    mask: str
    label: str
    patient: str
    split: str
    source: str = "base"

    def __post_init__(self):
        if not self.image:
            raise InputError("manifest entry has an empty image path")
        if self.split not in VALID_SPLITS:
            raise InputError(f"invalid split {self.split!r} for {self.image} (expected one of {VALID_SPLITS})")


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        seen: dict[str, str] = {}
        for e in entries:
            prev = seen.get(e.patient)
            if prev is not None and prev != e.split:
                raise InputError(
                    f"patient {e.patient!r} appears in both {prev!r} and {e.split!r} splits"
                )
            seen[e.patient] = e.split
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def subset(self, split: str) -> "DatasetManifest":
        return DatasetManifest(tuple(e for e in self.entries if e.split == split))

    def patients(self) -> list[str]:
        """Unique patient ids in order of first appearance."""
        out, seen = [], set()
        for e in self.entries:
            if e.patient not in seen:
                seen.add(e.patient)
                out.append(e.patient)
        return out


def read_manifest_csv(path: str) -> DatasetManifest:
    with open(path, newline="") as fh:
        return parse_manifest_csv(fh)


def parse_manifest_csv(fh) -> DatasetManifest:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("manifest CSV is empty") from None
    expected = ["image", "mask", "label", "patient", "split"]
    if [c.strip() for c in header[:5]] != expected:
        raise InputError(f"manifest header must start with {','.join(expected)}, got {header!r}")
    has_source = len(header) > 5 and header[5].strip() == "source"
    entries = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < 5:
            raise InputError(f"manifest line {lineno}: expected at least 5 columns, got {len(row)}")
        source = row[5] if has_source and len(row) > 5 and row[5] else "base"
        entries.append(ManifestEntry(row[0], row[1], row[2], row[3], row[4], source))
    return DatasetManifest(tuple(entries))


def write_manifest_csv(manifest: DatasetManifest, path: str) -> None:
    atomic_write_text(path, manifest_csv_text(manifest))


def manifest_csv_text(manifest: DatasetManifest) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_source = any(e.source != "base" for e in manifest.entries)
    header = ["image", "mask", "label", "patient", "split"]
    if with_source:
        header.append("source")
    writer.writerow(header)
    for e in manifest.entries:
        row = [e.image, e.mask, e.label, e.patient, e.split]
        if with_source:
            row.append(e.source)
        writer.writerow(row)
    return buf.getvalue()
