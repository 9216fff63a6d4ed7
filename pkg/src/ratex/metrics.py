"""Image quality metrics and benchmark aggregation."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from scipy.ndimage import gaussian_filter

from ratex.exceptions import DimensionMismatchError, EmptyInputError

PEAK = 255.0
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# 3.5 sigma reaches 5 pixels: an 11x11 window.
_SSIM_TRUNCATE = 3.5
_SSIM_RADIUS = 5

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _pair(a: npt.ArrayLike, b: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(
            f"cannot compare images of shape {x.shape} and {y.shape}"
        )
    if x.size == 0:
        raise DimensionMismatchError("cannot compare empty images")
    return x, y


def psnr(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Peak signal-to-noise ratio in dB over all samples.

    Returns ``math.inf`` for identical images.

    Raises
    ------
    DimensionMismatchError
        If the shapes differ.
    """
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(PEAK) - 10.0 * math.log10(mse)


def luma(image: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """BT.601 luma of an RGB image; 2-D input is returned as float."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ _LUMA_WEIGHTS
    raise DimensionMismatchError(f"expected HxW or HxWx3 image, got {arr.shape}")


def ssim(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Mean structural similarity of the luma channels.

    Local statistics use a Gaussian window (sigma 1.5, 11x11) with
    ``K1 = 0.01``, ``K2 = 0.03`` and ``L = 255``. The mean is taken over
    pixels whose window lies inside the image; images smaller than the
    window average over every pixel.

    Raises
    ------
    DimensionMismatchError
        If the shapes differ.
    """
    x, y = _pair(a, b)
    if np.array_equal(x, y):
        return 1.0
    x, y = luma(x), luma(y)
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2

    def blur(img: np.ndarray) -> np.ndarray:
        return gaussian_filter(
            img, sigma=SSIM_SIGMA, truncate=_SSIM_TRUNCATE, mode="reflect"
        )

    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    r = _SSIM_RADIUS
    if min(ssim_map.shape) > 2 * r:
        ssim_map = ssim_map[r:-r, r:-r]
    return float(np.mean(ssim_map))


def max_of_medians(samples: Sequence[Sequence[float]] | npt.ArrayLike) -> float:
    """Median across repetitions per viewpoint, then maximum across viewpoints.

    *samples* is indexed ``[viewpoint][repetition]``. Even repetition
    counts use the mean of the middle two values.

    Raises
    ------
    EmptyInputError
        Empty, ragged or non-2-D input.
    """
    try:
        matrix = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise EmptyInputError(f"samples must be a rectangular matrix: {exc}") from exc
    if matrix.ndim != 2 or matrix.size == 0:
        raise EmptyInputError(
            f"samples must be a non-empty viewpoint x repetition matrix, "
            f"got shape {matrix.shape}"
        )
    return float(np.median(matrix, axis=1).max())


def percentile(values: npt.ArrayLike, q: float) -> float:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise EmptyInputError("percentile of an empty sample")
    return float(np.percentile(arr, q))
