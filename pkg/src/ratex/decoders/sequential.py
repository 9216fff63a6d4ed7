"""Reference decoder following the DECODE procedure of T.81 Annex F.2.2.3."""

from __future__ import annotations

from ratex.bitstream import BitCursor
from ratex.exceptions import MalformedStreamError
from ratex.huffman import HuffmanDecoder


def huffman_next_symbol_sequential(cursor: BitCursor, decoder: HuffmanDecoder) -> int:
    """Grow the code one bit at a time until it falls under ``maxcode[length]``.

    The 16 candidate bits are prefetched once; only the matched length is
    consumed.
    """
    window = cursor.window
    maxcode = decoder.maxcode
    for length in range(1, 17):
        code = window >> (16 - length)
        if code <= maxcode[length]:
            cursor.skip(length)
            index = decoder.valptr[length] + code - decoder.mincode[length]
            return decoder.spec.symbols[index]
    raise MalformedStreamError(
        f"no Huffman code matches window {window:016b} at bit {cursor.position}"
    )


class SequentialSymbolDecoder:
    name = "sequential"

    def __init__(self) -> None:
        self.symbols_decoded = 0

    def next_symbol(self, cursor: BitCursor, table: HuffmanDecoder) -> int:
        symbol = huffman_next_symbol_sequential(cursor, table)
        self.symbols_decoded += 1
        return symbol
