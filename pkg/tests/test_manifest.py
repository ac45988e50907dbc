import io

import pytest

from roikit import (
    DatasetManifest,
    InputError,
    ManifestEntry,
    manifest_csv_text,
    parse_manifest_csv,
    read_manifest_csv,
    write_manifest_csv,
)


def entry(i, split="train", patient=None, source="base"):
    return ManifestEntry(
        image=f"img{i}.png",
        mask=f"mask{i}.png",
        label="1",
        patient=patient or f"p{i}",
        split=split,
        source=source,
    )


class TestEntries:
    def test_rejects_empty_image(self):
        with pytest.raises(InputError):
            ManifestEntry("", "m.png", "1", "p1", "train")

    def test_rejects_unknown_split(self):
        with pytest.raises(InputError):
            ManifestEntry("a.png", "m.png", "1", "p1", "holdout")

    def test_patient_split_conflict_rejected(self):
        with pytest.raises(InputError, match="p1"):
            DatasetManifest((entry(0, "train", patient="p1"), entry(1, "val", patient="p1")))

    def test_subset_and_patients(self):
        m = DatasetManifest((entry(0, "train"), entry(1, "val"), entry(2, "train")))
        assert len(m.subset("train")) == 2
        assert m.patients() == ["p0", "p1", "p2"]


class TestCsv:
    def test_round_trip(self, tmp_path):
        m = DatasetManifest((entry(0), entry(1, "test"), entry(2, "val")))
        p = str(tmp_path / "m.csv")
        write_manifest_csv(m, p)
        assert read_manifest_csv(p) == m

    def test_source_column_round_trip(self, tmp_path):
        m = DatasetManifest((entry(0), entry(1, source="weak")))
        p = str(tmp_path / "m.csv")
        write_manifest_csv(m, p)
        again = read_manifest_csv(p)
        assert [e.source for e in again] == ["base", "weak"]

    def test_source_column_omitted_when_all_base(self):
        text = manifest_csv_text(DatasetManifest((entry(0),)))
        assert text.splitlines()[0] == "image,mask,label,patient,split"

    def test_rejects_wrong_header(self):
        with pytest.raises(InputError):
            parse_manifest_csv(io.StringIO("image,mask,label,split\n"))

    def test_rejects_empty_file(self):
        with pytest.raises(InputError):
            parse_manifest_csv(io.StringIO(""))

    def test_rejects_short_row(self):
        with pytest.raises(InputError, match="line 2"):
            parse_manifest_csv(io.StringIO("image,mask,label,patient,split\na.png,b.png\n"))

    def test_blank_lines_skipped(self):
        m = parse_manifest_csv(
            io.StringIO("image,mask,label,patient,split\na.png,m.png,1,p1,train\n\n")
        )
        assert len(m) == 1
