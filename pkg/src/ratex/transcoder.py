"""JPEG to random-access texture transcoding.

Each MCU becomes a self-contained, byte-aligned segment: the Huffman DC
codes of Y1, Cb and Cr are dropped and replaced by a 36-bit header of
absolute values; every other entropy bit is copied verbatim. A two-level
index (one 32-bit offset per nine MCUs, 16-bit offsets for the other
eight) locates each segment.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from itertools import islice

import numpy as np
import numpy.typing as npt
from PIL import Image

from ratex.bitstream import BitWriter, extract_bits
from ratex.codestream import (
    DC_MAX,
    DC_MIN,
    decode_reference_image,
    parse_jpeg,
    walk_scan,
)
from ratex.decoders import SymbolDecoder
from ratex.encoder import encode_baseline
from ratex.exceptions import (
    DcOverflowError,
    DcRangeError,
    GroupSpanOverflowError,
    ImageError,
    TranscodeError,
)
from ratex.types import (
    DC_HEADER_BITS,
    INDEX_GROUP_SIZE,
    MCU_SIZE,
    MIP_LEVELS,
    IndexTable,
    MipChain,
    OverheadReport,
    ParsedJpeg,
    RaTexture,
)

logger = logging.getLogger(__name__)

MAX_TEXTURE_ID = (1 << 13) - 1
MAX_MCUS = 1 << 16


def build_index_table(offsets: Sequence[int]) -> IndexTable:
    """Group byte offsets into nine-MCU index groups.

    Raises
    ------
    GroupSpanOverflowError
        If an offset lies 65536 or more bytes after its group's first MCU.
    """
    absolute: list[int] = []
    relative: list[int] = []
    for start in range(0, len(offsets), INDEX_GROUP_SIZE):
        base = offsets[start]
        if base > 0xFFFFFFFF:
            raise TranscodeError(f"entropy blob offset {base} exceeds 32 bits")
        absolute.append(base)
        for m in range(start + 1, min(start + INDEX_GROUP_SIZE, len(offsets))):
            delta = offsets[m] - base
            if delta > 0xFFFF:
                raise GroupSpanOverflowError(
                    f"MCU {m} lies {delta} bytes after its group start "
                    f"(MCU {start}); relative offsets are 16-bit"
                )
            relative.append(delta)
    return IndexTable(
        absolute=tuple(absolute), relative=tuple(relative), mcu_count=len(offsets)
    )


def transcode(
    parsed: ParsedJpeg,
    texture_id: int = 0,
    symbols: SymbolDecoder | None = None,
) -> RaTexture:
    """Re-encode *parsed* into a random-access texture.

    Parameters
    ----------
    parsed:
        Baseline 4:2:0 JPEG from :func:`~ratex.codestream.parse_jpeg`.
    texture_id:
        13-bit id carried into cache keys.
    symbols:
        Symbol-decoding strategy for the scan walk.

    Raises
    ------
    DcRangeError
        Accumulated DC differences leave 12-bit two's complement.
    GroupSpanOverflowError
        A nine-MCU group spans 64 KiB or more.
    TranscodeError
        Texture id or MCU count outside the cache key fields.
    """
    if not 0 <= texture_id <= MAX_TEXTURE_ID:
        raise TranscodeError(f"texture_id {texture_id} does not fit in 13 bits")
    if parsed.mcu_count > MAX_MCUS:
        raise TranscodeError(
            f"{parsed.mcu_count} MCUs exceed the 16-bit MCU id space "
            f"({parsed.width}x{parsed.height} > 65536 MCUs)"
        )

    try:
        layout = walk_scan(parsed, symbols)
    except DcOverflowError as exc:
        raise DcRangeError(
            f"quantized DC {exc.value} outside [{DC_MIN}, {DC_MAX}]: {exc}"
        ) from exc
    data = layout.data
    dcs = layout.coefficients[:, (0, 4, 5), 0].tolist()
    bounds = layout.bounds.tolist()

    writer = BitWriter()
    offsets: list[int] = []
    dc_removed = 0
    padding = 0
    for mcu_bounds, header in zip(bounds, dcs, strict=True):
        offsets.append(writer.bits_written >> 3)
        for value in header:
            writer.write_signed(value, 12)
        y1, _, _, y4, cb, cr = mcu_bounds
        # Y1 ACs through the end of Y4, then the chroma ACs.
        for start, end in ((y1[1], y4[2]), (cb[1], cb[2]), (cr[1], cr[2])):
            writer.write(extract_bits(data, start, end), end - start)
        dc_removed += (y1[1] - y1[0]) + (cb[1] - cb[0]) + (cr[1] - cr[0])
        padding += writer.pad_to_byte()

    index = build_index_table(offsets)
    ra = RaTexture(
        width=parsed.width,
        height=parsed.height,
        mcu_cols=parsed.mcu_cols,
        mcu_rows=parsed.mcu_rows,
        quant_tables=dict(parsed.quant_tables),
        huffman_specs=dict(parsed.huffman_specs),
        components=parsed.components,
        index_table=index,
        entropy_blob=writer.getvalue(),
        texture_id=texture_id,
        source_bits=layout.end_bit,
        dc_removed_bits=dc_removed,
        padding_bits=padding,
    )
    report = compute_overhead(ra)
    logger.info(
        "transcoded texture %d (%dx%d, %d MCUs): %d -> %d entropy bytes, "
        "overhead %.4f bpp (%.4f unpadded)",
        texture_id,
        ra.width,
        ra.height,
        ra.mcu_count,
        (layout.end_bit + 7) // 8,
        len(ra.entropy_blob),
        report.effective_bpp,
        report.effective_bpp_unpadded,
    )
    return ra


def compute_overhead(ra: RaTexture) -> OverheadReport:
    """Bit accounting of the random-access layout against the source JPEG."""
    return OverheadReport(
        index_bits=ra.index_table.bits,
        dc_added_bits=DC_HEADER_BITS * ra.mcu_count,
        dc_removed_bits=ra.dc_removed_bits,
        padding_bits=ra.padding_bits,
        pixel_count=ra.width * ra.height,
        mcu_count=ra.mcu_count,
    )


def mip_dimensions(
    width: int, height: int, levels: int = MIP_LEVELS
) -> list[tuple[int, int]]:
    """Sizes of a mip chain: successive halving, clamped at 16 pixels."""
    sizes = [(width, height)]
    for _ in range(1, levels):
        w, h = sizes[-1]
        sizes.append((max(MCU_SIZE, w // 2), max(MCU_SIZE, h // 2)))
    return sizes


def _downscaled(rgb: npt.NDArray[np.uint8]) -> Iterator[npt.NDArray[np.uint8]]:
    """Yield every mip level of *rgb*, starting with *rgb* itself."""
    height, width = rgb.shape[:2]
    current = Image.fromarray(np.ascontiguousarray(rgb))
    for size in mip_dimensions(width, height):
        if current.size != size:
            current = current.resize(size, Image.Resampling.BOX)
        yield np.asarray(current)


def _check_mip_source(rgb: npt.NDArray[np.uint8]) -> None:
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageError(f"expected an HxWx3 RGB image, got shape {rgb.shape}")
    height, width = rgb.shape[:2]
    if width < MCU_SIZE or height < MCU_SIZE:
        raise ImageError(
            f"mip chains need at least 16x16 pixels, got {width}x{height}"
        )


def build_mip_chain(
    image: npt.NDArray[np.uint8],
    quality: int,
    texture_id: int = 0,
    symbols: SymbolDecoder | None = None,
) -> MipChain:
    """Encode and transcode eight successively box-filtered levels.

    Level ``k`` is the 2x2 box downscale of level ``k - 1`` (Pillow's
    ``BOX`` resampling on 8-bit values), each encoded independently at
    *quality*.

    Raises
    ------
    ImageError
        If the image is smaller than 16x16.
    """
    rgb = np.asarray(image, dtype=np.uint8)
    _check_mip_source(rgb)
    levels: list[RaTexture] = []
    for k, level in enumerate(_downscaled(rgb)):
        jpeg = encode_baseline(level, quality)
        levels.append(transcode(parse_jpeg(jpeg), texture_id, symbols))
        logger.debug(
            "mip level %d: %dx%d, %d bytes JPEG",
            k,
            level.shape[1],
            level.shape[0],
            len(jpeg),
        )
    return MipChain(levels=tuple(levels))


def transcode_jpeg_chain(
    jpeg: bytes,
    quality: int,
    texture_id: int = 0,
    symbols: SymbolDecoder | None = None,
) -> MipChain:
    """Mip chain whose level 0 is *jpeg* itself, transcoded without loss.

    Levels 1-7 are box downscales of the decoded JPEG, encoded at
    *quality*.
    """
    parsed = parse_jpeg(jpeg)
    base = transcode(parsed, texture_id, symbols)
    rgb = decode_reference_image(parsed, symbols)
    _check_mip_source(rgb)
    levels = [base]
    for level in islice(_downscaled(rgb), 1, None):
        levels.append(
            transcode(parse_jpeg(encode_baseline(level, quality)), texture_id, symbols)
        )
    return MipChain(levels=tuple(levels))
