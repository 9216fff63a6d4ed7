"""Reading and writing raw RGB images through Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ratex.exceptions import ImageError
from ratex.types import RGBImage


def read_image(path: str | Path) -> RGBImage:
    """Load any Pillow-readable image as ``(H, W, 3)`` uint8 RGB."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageError(f"cannot read image {path}: {exc}") from exc


def write_image(path: str | Path, image: RGBImage) -> None:
    """Write *image*; the format follows the suffix (``.png``, ``.ppm``, ...)."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ImageError(
            f"expected an HxWx3 uint8 image, got {arr.dtype} array of shape "
            f"{arr.shape}"
        )
    try:
        Image.fromarray(np.ascontiguousarray(arr)).save(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ImageError(f"cannot write image {path}: {exc}") from exc
