"""Random-access decoding of single MCUs from a :class:`RaTexture`.

A segment starts with the absolute quantized DCs of Y1, Cb and Cr as
12-bit two's complement values. The Huffman-coded body follows in scan
order: Y1 ACs, Y2/Y3/Y4 (DC difference to the previous Y block, then
ACs), Cb ACs, Cr ACs.
"""

from __future__ import annotations

import numpy as np

from ratex.bitstream import BitCursor
from ratex.codestream import (
    accumulate_dc,
    component_quant,
    component_tables,
    decode_ac,
    decode_dc_diff,
)
from ratex.decoders import SymbolDecoder, TableSymbolDecoder
from ratex.pixels import assemble_mcus, reconstruct_mcus
from ratex.types import (
    BLOCKS_PER_MCU,
    McuCoefficients,
    PixelBlock,
    RaTexture,
    RGBImage,
)

DC_BITS = 12


def _signed12(value: int) -> int:
    return value - (1 << DC_BITS) if value & (1 << (DC_BITS - 1)) else value


def decode_mcu_coefficients(
    ra: RaTexture, mcu_id: int, symbols: SymbolDecoder | None = None
) -> McuCoefficients:
    """Entropy-decode one MCU to ``(6, 64)`` natural-order coefficients.

    Raises
    ------
    IndexError
        If *mcu_id* is outside the texture.
    MalformedStreamError
        Invalid Huffman code, more than 63 ACs, a Y DC chain leaving
        12 bits, or a segment that ends early.
    """
    symbols = symbols or TableSymbolDecoder()
    (y_dc, y_ac), (_, cb_ac), (_, cr_ac) = component_tables(
        ra.huffman_specs, ra.components
    )
    cursor = BitCursor(ra.segment(mcu_id))
    y1 = _signed12(cursor.read(DC_BITS))
    cb = _signed12(cursor.read(DC_BITS))
    cr = _signed12(cursor.read(DC_BITS))

    blocks = [[0] * 64 for _ in range(BLOCKS_PER_MCU)]
    blocks[0][0] = y1
    decode_ac(cursor, y_ac, symbols, blocks[0])
    predictor = y1
    for b in (1, 2, 3):
        predictor = accumulate_dc(
            predictor, cursor, decode_dc_diff(cursor, y_dc, symbols)
        )
        blocks[b][0] = predictor
        decode_ac(cursor, y_ac, symbols, blocks[b])
    blocks[4][0] = cb
    decode_ac(cursor, cb_ac, symbols, blocks[4])
    blocks[5][0] = cr
    decode_ac(cursor, cr_ac, symbols, blocks[5])
    return np.asarray(blocks, dtype=np.int32)


def decode_mcu(
    ra: RaTexture, mcu_id: int, symbols: SymbolDecoder | None = None
) -> PixelBlock:
    """Decode MCU *mcu_id* to a ``16x16x3`` RGB block.

    The result is texel-identical to the sequential reference decode of
    the source JPEG restricted to that MCU (padding texels included).
    """
    coefficients = decode_mcu_coefficients(ra, mcu_id, symbols)
    luma, cb, cr = component_quant(ra.quant_tables, ra.components)
    return reconstruct_mcus(coefficients[None], luma, cb, cr)[0]


def decode_texture(ra: RaTexture, symbols: SymbolDecoder | None = None) -> RGBImage:
    """Decode every MCU through the random-access path and crop to size."""
    symbols = symbols or TableSymbolDecoder()
    coefficients = np.stack(
        [decode_mcu_coefficients(ra, m, symbols) for m in range(ra.mcu_count)]
    )
    luma, cb, cr = component_quant(ra.quant_tables, ra.components)
    blocks = reconstruct_mcus(coefficients, luma, cb, cr)
    return assemble_mcus(blocks, ra.mcu_cols, ra.width, ra.height)
