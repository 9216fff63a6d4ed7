"""Baseline 4:2:0 JFIF encoder with the Annex K tables.

Used to produce every mip level; output is accepted by :func:`parse_jpeg`
and by third-party decoders.
"""

from __future__ import annotations

import struct

import numpy as np
import numpy.typing as npt

from ratex.bitstream import BitWriter
from ratex.codestream import cached_huffman_decoder
from ratex.exceptions import ImageError
from ratex.huffman import (
    STD_AC_CHROMINANCE,
    STD_AC_LUMINANCE,
    STD_DC_CHROMINANCE,
    STD_DC_LUMINANCE,
    HuffmanDecoder,
)
from ratex.pixels import ZIGZAG, fdct_blocks, rgb_to_ycbcr, round_half_away
from ratex.types import MCU_SIZE, HuffmanSpec, RGBImage, TableClass

STD_LUMINANCE_QUANT = np.array(
    [
        16, 11, 10, 16, 24, 40, 51, 61,
        12, 12, 14, 19, 26, 58, 60, 55,
        14, 13, 16, 24, 40, 57, 69, 56,
        14, 17, 22, 29, 51, 87, 80, 62,
        18, 22, 37, 56, 68, 109, 103, 77,
        24, 35, 55, 64, 81, 104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101,
        72, 92, 95, 98, 112, 100, 103, 99,
    ],
    dtype=np.int32,
)  # fmt: skip
"""Annex K.1 luminance quantizers, natural order."""

STD_CHROMINANCE_QUANT = np.array(
    [
        17, 18, 24, 47, 99, 99, 99, 99,
        18, 21, 26, 66, 99, 99, 99, 99,
        24, 26, 56, 99, 99, 99, 99, 99,
        47, 66, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
    ],
    dtype=np.int32,
)  # fmt: skip
"""Annex K.2 chrominance quantizers, natural order."""

_TABLES: tuple[tuple[TableClass, int, HuffmanSpec], ...] = (
    (TableClass.DC, 0, STD_DC_LUMINANCE),
    (TableClass.AC, 0, STD_AC_LUMINANCE),
    (TableClass.DC, 1, STD_DC_CHROMINANCE),
    (TableClass.AC, 1, STD_AC_CHROMINANCE),
)


def quality_scale(quality: int) -> int:
    """Percentage applied to the base tables (libjpeg convention)."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in 1..100, got {quality}")
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def scaled_quant_table(base: npt.ArrayLike, quality: int) -> npt.NDArray[np.int32]:
    """Scale *base* for *quality*; entries are clamped to [1, 255]."""
    scale = quality_scale(quality)
    table = (np.asarray(base, dtype=np.int64) * scale + 50) // 100
    return np.clip(table, 1, 255).astype(np.int32)


def quantization_tables(
    quality: int,
) -> tuple[npt.NDArray[np.int32], npt.NDArray[np.int32]]:
    """Natural-order ``(luminance, chrominance)`` tables for *quality*."""
    return (
        scaled_quant_table(STD_LUMINANCE_QUANT, quality),
        scaled_quant_table(STD_CHROMINANCE_QUANT, quality),
    )


def _as_rgb(image: npt.ArrayLike) -> RGBImage:
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected an HxWx3 RGB image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImageError("cannot encode an empty image")
    if arr.shape[0] > 0xFFFF or arr.shape[1] > 0xFFFF:
        raise ImageError(f"image {arr.shape[1]}x{arr.shape[0]} exceeds 65535 pixels")
    if arr.dtype != np.uint8:
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    return arr


def quantize_image(
    image: npt.ArrayLike, quality: int
) -> tuple[npt.NDArray[np.int32], int, int]:
    """Forward path up to quantization.

    Returns
    -------
    tuple
        ``(coefficients, mcu_cols, mcu_rows)`` where coefficients is
        ``(mcu_count, 6, 64)`` in zigzag order.
    """
    rgb = _as_rgb(image)
    height, width = rgb.shape[:2]
    pad_h = -height % MCU_SIZE
    pad_w = -width % MCU_SIZE
    padded = np.pad(rgb, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    rows, cols = padded.shape[0] // MCU_SIZE, padded.shape[1] // MCU_SIZE

    ycc = rgb_to_ycbcr(padded) - 128.0
    y = ycc[..., 0].reshape(rows, 2, 8, cols, 2, 8).transpose(0, 3, 1, 4, 2, 5)
    y = y.reshape(rows * cols, 4, 8, 8)
    chroma = ycc[..., 1:].reshape(rows, 8, 2, cols, 8, 2, 2).mean(axis=(2, 5))
    chroma = chroma.transpose(0, 2, 4, 1, 3).reshape(rows * cols, 2, 8, 8)
    blocks = np.concatenate((y, chroma), axis=1)

    luma_q, chroma_q = quantization_tables(quality)
    quant = np.stack([luma_q] * 4 + [chroma_q] * 2)
    coeffs = round_half_away(fdct_blocks(blocks) / quant).astype(np.int32)
    coeffs[..., 0] = np.clip(coeffs[..., 0], -1024, 1023)
    coeffs[..., 1:] = np.clip(coeffs[..., 1:], -1023, 1023)
    return coeffs[..., ZIGZAG], cols, rows


def _magnitude(value: int) -> tuple[int, int]:
    """``(category, bits)`` of a coefficient (T.81 F.1.2.1)."""
    size = abs(value).bit_length()
    return size, (value if value >= 0 else value + (1 << size) - 1)


def _encode_block(
    writer: BitWriter,
    zz: list[int],
    diff: int,
    dc: HuffmanDecoder,
    ac: HuffmanDecoder,
) -> None:
    size, bits = _magnitude(diff)
    code, length = dc.encoding[size]
    writer.write(code, length)
    writer.write(bits, size)

    ac_codes = ac.encoding
    run = 0
    for k in range(1, 64):
        value = zz[k]
        if value == 0:
            run += 1
            continue
        while run > 15:
            code, length = ac_codes[0xF0]
            writer.write(code, length)
            run -= 16
        size, bits = _magnitude(value)
        code, length = ac_codes[(run << 4) | size]
        writer.write(code, length)
        writer.write(bits, size)
        run = 0
    if run:
        code, length = ac_codes[0x00]
        writer.write(code, length)


def encode_scan(coefficients: npt.NDArray[np.int32]) -> bytes:
    """Huffman-code ``(mcu_count, 6, 64)`` zigzag coefficients into scan bytes.

    The result is byte-stuffed and padded with 1-bits.
    """
    dc_y, ac_y, dc_c, ac_c = (cached_huffman_decoder(spec) for _, _, spec in _TABLES)
    tables = [(dc_y, ac_y)] * 4 + [(dc_c, ac_c)] * 2
    components = (0, 0, 0, 0, 1, 2)
    writer = BitWriter(stuff=True)
    predictors = [0, 0, 0]
    for mcu in coefficients.tolist():
        for b, zz in enumerate(mcu):
            comp = components[b]
            dc_table, ac_table = tables[b]
            _encode_block(writer, zz, zz[0] - predictors[comp], dc_table, ac_table)
            predictors[comp] = zz[0]
    writer.pad_to_byte()
    return writer.getvalue()


def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def encode_baseline(image: npt.ArrayLike, quality: int) -> bytes:
    """Encode an RGB8 image as baseline 4:2:0 JFIF.

    Dimensions that are not multiples of 16 are padded by edge
    replication; the frame header carries the true size.

    Parameters
    ----------
    image:
        ``HxWx3`` uint8 array (a 2D array is treated as grayscale).
    quality:
        1-100, mapped onto the Annex K tables with the libjpeg scaling.

    Raises
    ------
    ImageError
        If the image is empty or not RGB.
    """
    rgb = _as_rgb(image)
    height, width = rgb.shape[:2]
    coeffs, _, _ = quantize_image(rgb, quality)
    luma_q, chroma_q = quantization_tables(quality)

    out = bytearray(b"\xff\xd8")
    out += _segment(0xE0, b"JFIF\x00" + struct.pack(">BBBHHBB", 1, 1, 0, 1, 1, 0, 0))
    dqt = b"".join(
        bytes([table_id]) + bytes(table[ZIGZAG].tolist())
        for table_id, table in ((0, luma_q), (1, chroma_q))
    )
    out += _segment(0xDB, dqt)
    sof = struct.pack(">BHHB", 8, height, width, 3) + bytes(
        [1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1]
    )
    out += _segment(0xC0, sof)
    dht = b"".join(
        bytes([(int(tc) << 4) | th, *spec.counts, *spec.symbols])
        for tc, th, spec in _TABLES
    )
    out += _segment(0xC4, dht)
    out += _segment(0xDA, bytes([3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]))
    out += encode_scan(coeffs)
    out += b"\xff\xd9"
    return bytes(out)
