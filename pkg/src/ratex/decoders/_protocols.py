"""Symbol-decoder protocol.

Every strategy reads one run/size (or DC category) symbol from a
:class:`~ratex.bitstream.BitCursor` using a
:class:`~ratex.huffman.HuffmanDecoder`, and consumes exactly the matched
code's length. Strategies differ only in how the match is found:

- ``table``: direct 16-bit lookup
- ``sequential``: length-by-length MAXCODE search (T.81 Annex F.2.2.3)
- ``ballot``: 32-lane compare-and-ballot emulation
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

from ratex.bitstream import BitCursor
from ratex.huffman import HuffmanDecoder


@runtime_checkable
class SymbolDecoder(Protocol):
    """Decodes Huffman symbols from a bit cursor."""

    name: str
    symbols_decoded: int

    def next_symbol(self, cursor: BitCursor, table: HuffmanDecoder) -> int:
        """Return the next symbol and advance *cursor* past its code.

        Raises
        ------
        MalformedStreamError
            If no code of the table matches the next 16 bits.
        """
        ...
