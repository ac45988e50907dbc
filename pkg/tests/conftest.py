import numpy as np
import pytest

from roikit import BinaryMask, ImagePlane, ProbabilityMap


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def phantom(height=128, width=128):
    """Disc plus rectangle test mask, reproducible and asymmetric."""
    truth = np.zeros((height, width), dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width]
    truth[((yy - height // 2) ** 2 + (xx - width // 2 - 6) ** 2) <= (height // 4) ** 2] = 1
    truth[height // 6 : height // 3, width // 10 : width // 3] = 1
    return truth


def corrupt(truth, sensitivity, specificity, rng):
    """Flip pixels of a {0,1} array with rater-style error rates."""
    fg = rng.random(truth.shape) < sensitivity
    bg = rng.random(truth.shape) >= specificity
    return np.where(truth == 1, fg, bg).astype(np.uint8)


def as_mask(arr):
    return BinaryMask(np.asarray(arr, dtype=np.uint8))


def as_prob(arr):
    return ProbabilityMap(np.asarray(arr, dtype=np.float64))


def as_plane(arr):
    return ImagePlane(np.asarray(arr, dtype=np.float64))
