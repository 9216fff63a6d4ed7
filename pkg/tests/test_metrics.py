"""Tests for PSNR, SSIM and benchmark aggregation."""

from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import smooth_image, two_step_max_of_medians

from ratex.exceptions import DimensionMismatchError, EmptyInputError, MetricError
from ratex.metrics import luma, max_of_medians, percentile, psnr, ssim


class TestPsnr:
    def test_unit_mse(self):
        a = np.zeros((8, 8, 3), dtype=np.uint8)
        assert psnr(a, a + 1) == pytest.approx(48.1308, abs=1e-4)

    def test_identical(self):
        image = smooth_image(16, 16)
        assert psnr(image, image) == math.inf

    def test_known_mse(self):
        a = np.full((4, 4), 100.0)
        b = a.copy()
        b[0, 0] += 16.0  # MSE 16
        expected = 20 * math.log10(255) - 10 * math.log10(16.0)
        assert psnr(a, b) == pytest.approx(expected)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError, match="shape"):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))
        assert issubclass(DimensionMismatchError, MetricError)

    def test_empty(self):
        with pytest.raises(DimensionMismatchError, match="empty"):
            psnr(np.zeros((0, 3)), np.zeros((0, 3)))


class TestSsim:
    def test_identical(self):
        image = smooth_image(32, 32, seed=1)
        assert ssim(image, image) == 1.0

    def test_noise_lowers_score(self):
        image = smooth_image(48, 48, seed=2)
        rng = np.random.default_rng(0)
        scores = []
        for sigma in (2.0, 10.0, 40.0):
            noisy = image + rng.normal(0, sigma, image.shape)
            scores.append(ssim(image, np.clip(noisy, 0, 255)))
        assert 1.0 > scores[0] > scores[1] > scores[2]

    def test_symmetric(self):
        a = smooth_image(24, 24, seed=3)
        b = smooth_image(24, 24, seed=4)
        assert ssim(a, b) == pytest.approx(ssim(b, a))

    def test_small_images(self):
        a = smooth_image(8, 8, seed=5)
        b = np.clip(a.astype(int) + 3, 0, 255)
        assert 0.0 < ssim(a, b) < 1.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ssim(np.zeros((16, 16, 3)), np.zeros((16, 16)))

    def test_luma(self):
        pixel = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]])
        np.testing.assert_allclose(luma(pixel)[0], [76.245, 149.685, 29.07])
        with pytest.raises(DimensionMismatchError):
            luma(np.zeros((2, 2, 4)))


class TestMaxOfMedians:
    @pytest.mark.parametrize(("views", "reps"), [(1, 1), (7, 5), (6, 4), (60, 10)])
    def test_matches_two_step_oracle(self, views, reps):
        rng = np.random.default_rng(views * reps)
        matrix = rng.exponential(0.01, size=(views, reps)).tolist()
        assert max_of_medians(matrix) == pytest.approx(
            two_step_max_of_medians(matrix)
        )

    def test_even_repetitions_average_middle(self):
        assert max_of_medians([[1.0, 2.0, 10.0, 20.0], [3.0, 3.0, 3.0, 3.0]]) == 6.0

    def test_outlier_repetition_ignored(self):
        assert max_of_medians([[1.0, 1.0, 100.0], [2.0, 2.0, 2.0]]) == 2.0

    @pytest.mark.parametrize("samples", [[], [[]], [[1.0, 2.0], [3.0]], [1.0, 2.0]])
    def test_invalid(self, samples):
        with pytest.raises(EmptyInputError):
            max_of_medians(samples)


class TestPercentile:
    def test_values(self):
        values = list(range(101))
        assert percentile(values, 99.0) == pytest.approx(99.0)
        assert percentile([[1.0, 3.0], [2.0, 4.0]], 50.0) == pytest.approx(2.5)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            percentile([], 50.0)
