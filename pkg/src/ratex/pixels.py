"""Normative pixel math shared by every decode path.

The reference decoder, the random-access MCU decoder and the encoder's
reconstruction all go through these functions, so their outputs are
texel-identical by construction:

- dequantize in natural order, direct 2D IDCT in double precision
- add 128, round half away from zero, clamp to [0, 255]
- replicate chroma 2x2, convert YCbCr -> RGB with the JFIF matrix,
  round half away from zero, clamp
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from ratex.types import CoeffBlock, PixelBlock

ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10,
        17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.intp,
)  # fmt: skip
"""``ZIGZAG[k]`` is the natural (row-major) index of zigzag position ``k``."""

TIE_EPSILON = 1e-9
"""Values this close below a half-integer round as exact ties."""


def _basis() -> npt.NDArray[np.float64]:
    basis = np.empty((8, 8), dtype=np.float64)
    for f in range(8):
        scale = 1.0 / math.sqrt(2.0) if f == 0 else 1.0
        for p in range(8):
            basis[f, p] = 0.5 * scale * math.cos((2 * p + 1) * f * math.pi / 16.0)
    return basis


DCT_BASIS = _basis()
"""``DCT_BASIS[f, p] = C(f)/2 * cos((2p+1) f pi / 16)``; orthonormal."""


def round_half_away(values: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Round to the nearest integer, ties away from zero."""
    arr = np.asarray(values, dtype=np.float64)
    return np.copysign(np.floor(np.abs(arr) + 0.5 + TIE_EPSILON), arr)


def natural_quant(zigzag_table: npt.ArrayLike) -> npt.NDArray[np.int32]:
    """Reorder a zigzag quantization table to natural order."""
    table = np.asarray(zigzag_table, dtype=np.int32)
    natural = np.empty(64, dtype=np.int32)
    natural[ZIGZAG] = table
    return natural


# ---------------------------------------------------------------------------
# Inverse path
# ---------------------------------------------------------------------------


def idct_blocks(
    coeffs: npt.NDArray[np.integer], quant: npt.NDArray[np.integer]
) -> npt.NDArray[np.uint8]:
    """Dequantize and inverse-transform a batch of blocks.

    Parameters
    ----------
    coeffs:
        ``(..., 64)`` quantized coefficients, natural order.
    quant:
        ``(..., 64)`` natural-order quantizers, broadcast against *coeffs*.

    Returns
    -------
    ndarray
        ``(..., 8, 8)`` uint8 samples.
    """
    spectrum = (np.asarray(coeffs, np.float64) * np.asarray(quant, np.float64))
    spectrum = spectrum.reshape(*spectrum.shape[:-1], 8, 8)
    samples = DCT_BASIS.T @ spectrum @ DCT_BASIS
    return np.clip(round_half_away(samples + 128.0), 0, 255).astype(np.uint8)


def idct_8x8(coeffs: CoeffBlock, quant: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Normative IDCT of one block: 64 natural-order samples in [0, 255]."""
    block = idct_blocks(np.asarray(coeffs).reshape(64), np.asarray(quant).reshape(64))
    return block.reshape(64)


def upsample_and_color(
    y_blocks: npt.NDArray[np.integer],
    cb: npt.NDArray[np.integer],
    cr: npt.NDArray[np.integer],
) -> PixelBlock:
    """Assemble one MCU's samples into a 16x16 RGB block.

    *y_blocks* are the four 8x8 luminance blocks in order top-left,
    top-right, bottom-left, bottom-right; leading batch dimensions are
    allowed on all three inputs.
    """
    y = np.asarray(y_blocks, dtype=np.float64)
    batch = y.shape[:-3]
    y = y.reshape(*batch, 2, 2, 8, 8).swapaxes(-3, -2).reshape(*batch, 16, 16)
    cb_full = np.repeat(np.repeat(np.asarray(cb, np.float64), 2, axis=-1), 2, axis=-2)
    cr_full = np.repeat(np.repeat(np.asarray(cr, np.float64), 2, axis=-1), 2, axis=-2)
    return ycbcr_to_rgb(y, cb_full, cr_full)


def ycbcr_to_rgb(
    y: npt.NDArray[np.float64],
    cb: npt.NDArray[np.float64],
    cr: npt.NDArray[np.float64],
) -> npt.NDArray[np.uint8]:
    cb = cb - 128.0
    cr = cr - 128.0
    rgb = np.stack(
        (
            y + 1.402 * cr,
            y - 0.344136 * cb - 0.714136 * cr,
            y + 1.772 * cb,
        ),
        axis=-1,
    )
    return np.clip(round_half_away(rgb), 0, 255).astype(np.uint8)


def reconstruct_mcus(
    coeffs: npt.NDArray[np.integer],
    luma_quant: npt.NDArray[np.integer],
    cb_quant: npt.NDArray[np.integer],
    cr_quant: npt.NDArray[np.integer],
) -> npt.NDArray[np.uint8]:
    """Turn ``(N, 6, 64)`` MCU coefficients into ``(N, 16, 16, 3)`` RGB."""
    coeffs = np.asarray(coeffs)
    y = idct_blocks(coeffs[:, :4], luma_quant)
    cb = idct_blocks(coeffs[:, 4], cb_quant)
    cr = idct_blocks(coeffs[:, 5], cr_quant)
    return upsample_and_color(y, cb, cr)


def assemble_mcus(
    blocks: npt.NDArray[np.uint8], mcu_cols: int, width: int, height: int
) -> npt.NDArray[np.uint8]:
    """Tile raster-ordered 16x16 blocks into an image and crop it."""
    mcu_rows = blocks.shape[0] // mcu_cols
    grid = blocks.reshape(mcu_rows, mcu_cols, 16, 16, 3).swapaxes(1, 2)
    image = grid.reshape(mcu_rows * 16, mcu_cols * 16, 3)
    return np.ascontiguousarray(image[:height, :width])


# ---------------------------------------------------------------------------
# Forward path (encoder)
# ---------------------------------------------------------------------------


def rgb_to_ycbcr(image: npt.NDArray[np.uint8]) -> npt.NDArray[np.float64]:
    """JFIF forward colour transform, kept in floating point."""
    rgb = np.asarray(image, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return np.stack(
        (
            0.299 * r + 0.587 * g + 0.114 * b,
            -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0,
            0.5 * r - 0.418688 * g - 0.081312 * b + 128.0,
        ),
        axis=-1,
    )


def fdct_blocks(samples: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Forward DCT of ``(..., 8, 8)`` level-shifted samples -> ``(..., 64)``."""
    spectrum = DCT_BASIS @ np.asarray(samples, np.float64) @ DCT_BASIS.T
    return spectrum.reshape(*spectrum.shape[:-2], 64)
