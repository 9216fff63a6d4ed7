"""Warp-style Huffman matching, emulated deterministically.

A warp of 32 lanes walks the code table in chunks of 32 candidates. Each
lane trims the shared 16-bit window to its candidate's length and compares;
a ballot collects the matching lanes and the winner broadcasts symbol and
length. Canonical codes are prefix-free, so at most one lane wins.
"""

from __future__ import annotations

import numpy as np

from ratex.bitstream import BitCursor
from ratex.exceptions import MalformedStreamError
from ratex.huffman import HuffmanDecoder

WARP_SIZE = 32


def ballot_match(window: int, decoder: HuffmanDecoder) -> tuple[int, int]:
    """Return ``(code index or -1, ballot rounds used)`` for *window*."""
    codes = decoder.code_array
    lengths = decoder.length_array
    rounds = 0
    for start in range(0, len(codes), WARP_SIZE):
        rounds += 1
        lane_lengths = lengths[start : start + WARP_SIZE]
        trimmed = window >> (16 - lane_lengths)
        ballot = np.flatnonzero(trimmed == codes[start : start + WARP_SIZE])
        if ballot.size:
            return start + int(ballot[0]), rounds
    return -1, rounds


def huffman_next_symbol_ballot(cursor: BitCursor, decoder: HuffmanDecoder) -> int:
    """Decode one symbol with the 32-lane ballot emulation."""
    winner, _ = ballot_match(cursor.window, decoder)
    if winner < 0:
        raise MalformedStreamError(
            f"no Huffman code matches window {cursor.window:016b} "
            f"at bit {cursor.position}"
        )
    cursor.skip(decoder.lengths[winner])
    return decoder.spec.symbols[winner]


class BallotSymbolDecoder:
    """Ballot strategy with round instrumentation.

    Attributes
    ----------
    rounds:
        Total ballot rounds over all decoded symbols.
    max_rounds:
        Largest number of rounds a single symbol needed.
    """

    name = "ballot"

    def __init__(self) -> None:
        self.symbols_decoded = 0
        self.rounds = 0
        self.max_rounds = 0

    def next_symbol(self, cursor: BitCursor, table: HuffmanDecoder) -> int:
        winner, rounds = ballot_match(cursor.window, table)
        self.rounds += rounds
        self.max_rounds = max(self.max_rounds, rounds)
        if winner < 0:
            raise MalformedStreamError(
                f"no Huffman code matches window {cursor.window:016b} "
                f"at bit {cursor.position}"
            )
        cursor.skip(table.lengths[winner])
        self.symbols_decoded += 1
        return table.spec.symbols[winner]
