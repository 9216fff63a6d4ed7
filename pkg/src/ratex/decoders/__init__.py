"""Huffman symbol-decoding strategies.

The protocol is always available; :func:`get_symbol_decoder` builds a fresh
strategy instance by configuration name.
"""

from ratex.decoders._protocols import SymbolDecoder
from ratex.decoders.ballot import BallotSymbolDecoder, huffman_next_symbol_ballot
from ratex.decoders.sequential import (
    SequentialSymbolDecoder,
    huffman_next_symbol_sequential,
)
from ratex.decoders.table import TableSymbolDecoder, huffman_next_symbol_table
from ratex.exceptions import ConfigurationError


def get_symbol_decoder(name: str = "table") -> SymbolDecoder:
    """Instantiate the strategy registered under *name*."""
    if name == "table":
        return TableSymbolDecoder()
    if name == "sequential":
        return SequentialSymbolDecoder()
    if name == "ballot":
        return BallotSymbolDecoder()
    raise ConfigurationError(
        f"unknown symbol decoder {name!r}; choose table, sequential or ballot"
    )


__all__ = [
    "BallotSymbolDecoder",
    "SequentialSymbolDecoder",
    "SymbolDecoder",
    "TableSymbolDecoder",
    "get_symbol_decoder",
    "huffman_next_symbol_ballot",
    "huffman_next_symbol_sequential",
    "huffman_next_symbol_table",
]
