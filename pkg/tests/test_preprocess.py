import numpy as np
import pytest

from roikit import (
    BoundingBox,
    CropTransform,
    DegenerateWarning,
    DroppedItemWarning,
    InputError,
    lung_crop,
    preprocess_chain,
    rescale_boxes,
    resize,
    resize_mask,
    saturate_contrast,
    standardize,
)

from conftest import as_mask, as_plane


class TestLungCrop:
    def test_l_shaped_mask_tight_crop_and_zeroing(self):
        img = as_plane(np.arange(25, dtype=float).reshape(5, 5))
        mask = as_mask(
            [
                [0, 0, 0, 0, 0],
                [0, 1, 0, 0, 0],
                [0, 1, 0, 0, 0],
                [0, 1, 1, 1, 0],
                [0, 0, 0, 0, 0],
            ]
        )
        cropped, t = lung_crop(img, mask)
        assert (t.offset_x, t.offset_y, t.out_w, t.out_h) == (1, 1, 3, 3)
        assert cropped.data.shape == (3, 3)
        # inside the box but outside the mask is zeroed
        assert cropped.data[0, 1] == 0.0 and cropped.data[0, 2] == 0.0
        assert cropped.data[0, 0] == img.data[1, 1]
        assert cropped.data[2, 2] == img.data[3, 3]

    def test_empty_mask_rejected(self):
        with pytest.raises(InputError):
            lung_crop(as_plane(np.ones((3, 3))), as_mask(np.zeros((3, 3), dtype=np.uint8)))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            lung_crop(as_plane(np.ones((3, 3))), as_mask(np.ones((4, 4), dtype=np.uint8)))


class TestResize:
    def test_identity_resize(self, rng):
        img = as_plane(rng.random((6, 9)))
        out = resize(img, 9, 6)
        assert np.array_equal(out.data, img.data)

    def test_bilinear_1x2_to_1x4_worked(self):
        # source x of output j: (j + 0.5) * 2/4 - 0.5 -> -0.25, 0.25, 0.75, 1.25
        # clamped to [0, 1] -> samples 0, 0.25, 0.75, 1
        img = as_plane([[0.0, 1.0]])
        out = resize(img, 4, 1)
        assert np.allclose(out.data, [[0.0, 0.25, 0.75, 1.0]], atol=1e-15)

    def test_nearest_checkerboard_block_replication(self):
        img = as_plane([[0.0, 1.0], [1.0, 0.0]])
        out = resize(img, 4, 4, mode="nearest")
        expect = np.array(
            [
                [0, 0, 1, 1],
                [0, 0, 1, 1],
                [1, 1, 0, 0],
                [1, 1, 0, 0],
            ],
            dtype=float,
        )
        assert np.array_equal(out.data, expect)

    def test_output_dims_exact(self, rng):
        out = resize(as_plane(rng.random((7, 5))), 13, 3)
        assert out.data.shape == (3, 13)

    def test_downscale_constant_stays_constant(self):
        out = resize(as_plane(np.full((8, 8), 0.37)), 3, 3)
        assert np.allclose(out.data, 0.37)

    def test_mask_resize_stays_binary(self, rng):
        m = as_mask((rng.random((9, 9)) < 0.5).astype(np.uint8))
        out = resize_mask(m, 17, 4)
        assert set(np.unique(out.data)).issubset({0, 1})
        assert out.data.shape == (4, 17)

    def test_unknown_mode_rejected(self):
        with pytest.raises(InputError):
            resize(as_plane(np.ones((2, 2))), 4, 4, mode="cubic")


class TestSaturate:
    def test_full_span_is_unchanged_at_0_100(self):
        img = as_plane(np.linspace(0, 1, 50).reshape(5, 10))
        out = saturate_contrast(img, 0.0, 100.0)
        assert np.allclose(out.data, img.data, atol=1e-15)

    def test_ramp_percentiles_worked(self):
        # linear-interpolation percentiles of 0..99: 1% -> 0.99, 99% -> 98.01
        ramp = as_plane(np.arange(100, dtype=float).reshape(10, 10))
        out = saturate_contrast(ramp, 1.0, 99.0)
        lo, hi = 0.99, 98.01
        expect = (np.clip(ramp.data, lo, hi) - lo) / (hi - lo)
        assert np.allclose(out.data, expect, atol=1e-12)
        assert out.data.min() == 0.0 and out.data.max() == 1.0

    def test_constant_image_flagged_zeroed(self):
        with pytest.warns(DegenerateWarning):
            out = saturate_contrast(as_plane(np.full((4, 4), 3.0)))
        assert np.all(out.data == 0.0)

    def test_percentile_order_enforced(self):
        with pytest.raises(InputError):
            saturate_contrast(as_plane(np.ones((2, 2))), 99.0, 1.0)


class TestStandardize:
    def test_two_pixel_worked_case(self):
        out, stats = standardize(as_plane([[10.0, 12.0]]))
        assert np.allclose(out.data, [[-1.0, 1.0]])
        assert stats.mean == 11.0 and stats.std == 1.0 and not stats.degenerate

    def test_random_plane_moments(self, rng):
        out, stats = standardize(as_plane(rng.random((16, 16)) * 40 + 3))
        assert abs(out.data.mean()) < 1e-6
        assert abs(out.data.std() - 1.0) < 1e-6

    def test_constant_image_degenerate(self):
        with pytest.warns(DegenerateWarning):
            out, stats = standardize(as_plane(np.full((3, 3), 7.0)))
        assert np.all(out.data == 0.0)
        assert stats.degenerate and stats.std == 0.0 and stats.mean == 7.0


class TestRescaleBoxes:
    def test_identity_transform(self):
        t = CropTransform(0, 0, 1.0, 1.0, 100, 100)
        boxes = [BoundingBox(3, 4, 5, 6)]
        assert rescale_boxes(boxes, t) == boxes

    def test_offset_worked_example(self):
        t = CropTransform(10, 10, 1.0, 1.0, 50, 50)
        assert rescale_boxes([BoundingBox(12, 12, 4, 4)], t) == [BoundingBox(2, 2, 4, 4)]

    def test_box_left_of_crop_dropped_with_warning(self):
        t = CropTransform(10, 10, 1.0, 1.0, 50, 50)
        with pytest.warns(DroppedItemWarning):
            assert rescale_boxes([BoundingBox(0, 0, 5, 5)], t) == []

    def test_scaling_rounds_corners(self):
        t = CropTransform(0, 0, 0.5, 0.5, 10, 10)
        # corners (3,3) and (8,8) -> 1.5, 4.0 -> round-half-up 2..4
        out = rescale_boxes([BoundingBox(3, 3, 5, 5)], t)
        assert out == [BoundingBox(2, 2, 2, 2)]

    def test_partial_overhang_clips(self):
        t = CropTransform(0, 0, 1.0, 1.0, 5, 5)
        out = rescale_boxes([BoundingBox(3, 3, 9, 9)], t)
        assert out == [BoundingBox(3, 3, 2, 2)]

    def test_transform_dict_round_trip(self):
        t = CropTransform(7, 9, 0.5, 2.0, 64, 32)
        assert CropTransform.from_dict(t.as_dict()) == t


class TestChain:
    def test_chain_shapes_and_composition(self, rng):
        img = as_plane(rng.random((40, 60)) * 100)
        mask = np.zeros((40, 60), dtype=np.uint8)
        mask[10:30, 20:50] = 1
        final, t, stats = preprocess_chain(img, as_mask(mask), size=32)
        assert final.data.shape == (32, 32)
        assert (t.offset_x, t.offset_y) == (20, 10)
        assert t.scale_x == pytest.approx(32 / 30)
        assert t.scale_y == pytest.approx(32 / 20)
        assert (t.out_w, t.out_h) == (32, 32)
        assert not stats.degenerate
        assert abs(final.data.mean()) < 1e-9

    def test_chain_box_carry_through_matches_manual(self):
        img = as_plane(np.random.default_rng(3).random((20, 20)))
        mask = np.zeros((20, 20), dtype=np.uint8)
        mask[4:16, 4:16] = 1
        _, t, _ = preprocess_chain(img, as_mask(mask), size=24)
        out = rescale_boxes([BoundingBox(6, 6, 4, 4)], t)
        # corners (6-4)*2 = 4 and (10-4)*2 = 12
        assert out == [BoundingBox(4, 4, 8, 8)]

    def test_chain_deterministic(self, rng):
        img = as_plane(rng.random((30, 30)))
        mask = np.zeros((30, 30), dtype=np.uint8)
        mask[5:25, 5:25] = 1
        a = preprocess_chain(img, as_mask(mask), size=16)
        b = preprocess_chain(img, as_mask(mask), size=16)
        assert np.array_equal(a[0].data, b[0].data)
        assert a[1] == b[1]
