"""Direct lookup decoder: one 64 Ki-entry table probe per symbol."""

from __future__ import annotations

from ratex.bitstream import BitCursor
from ratex.exceptions import MalformedStreamError
from ratex.huffman import HuffmanDecoder


def huffman_next_symbol_table(cursor: BitCursor, decoder: HuffmanDecoder) -> int:
    """Decode one symbol by indexing ``decoder.lookup`` with the 16-bit window."""
    entry = decoder.lookup[cursor.window]
    if not entry:
        raise MalformedStreamError(
            f"no Huffman code matches window {cursor.window:016b} "
            f"at bit {cursor.position}"
        )
    cursor.skip(entry >> 8)
    return entry & 0xFF


class TableSymbolDecoder:
    """Default strategy; fastest in CPython."""

    name = "table"

    def __init__(self) -> None:
        self.symbols_decoded = 0

    def next_symbol(self, cursor: BitCursor, table: HuffmanDecoder) -> int:
        symbol = huffman_next_symbol_table(cursor, table)
        self.symbols_decoded += 1
        return symbol
