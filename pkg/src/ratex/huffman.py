"""Canonical Huffman tables (ITU T.81 Annex C) and the Annex K defaults.

A :class:`HuffmanDecoder` is built once per table and shared by every
symbol-decoding strategy in :mod:`ratex.decoders`; it also carries the
inverse (symbol -> code) map used by the encoder and the transcoder.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from ratex.exceptions import InvalidHuffmanSpecError
from ratex.types import HuffmanSpec

# ---------------------------------------------------------------------------
# Annex K.3 typical tables
# ---------------------------------------------------------------------------

STD_DC_LUMINANCE = HuffmanSpec(
    counts=(0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0),
    symbols=tuple(range(12)),
)

STD_DC_CHROMINANCE = HuffmanSpec(
    counts=(0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0),
    symbols=tuple(range(12)),
)

STD_AC_LUMINANCE = HuffmanSpec(
    counts=(0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D),
    symbols=(
        0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
        0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
        0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
        0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
        0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
        0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
        0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
        0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
        0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
        0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
        0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
        0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
        0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
        0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
        0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
        0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
        0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
        0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
        0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
        0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
        0xF9, 0xFA,
    ),
)  # fmt: skip

STD_AC_CHROMINANCE = HuffmanSpec(
    counts=(0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77),
    symbols=(
        0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21,
        0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
        0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
        0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0,
        0x15, 0x62, 0x72, 0xD1, 0x0A, 0x16, 0x24, 0x34,
        0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
        0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38,
        0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
        0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
        0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
        0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78,
        0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
        0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96,
        0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5,
        0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
        0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
        0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2,
        0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
        0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9,
        0xEA, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
        0xF9, 0xFA,
    ),
)  # fmt: skip


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------


def canonical_codes(spec: HuffmanSpec) -> list[tuple[int, int]]:
    """Assign canonical ``(code, length)`` pairs in symbol order.

    Raises
    ------
    InvalidHuffmanSpecError
        If the counts overflow a code length (Kraft sum > 1).
    """
    codes: list[tuple[int, int]] = []
    code = 0
    for length, count in enumerate(spec.counts, start=1):
        for _ in range(count):
            if code >= 1 << length:
                raise InvalidHuffmanSpecError(
                    f"{count} codes of length {length} exceed the code space "
                    "(Kraft inequality violated)"
                )
            codes.append((code, length))
            code += 1
        code <<= 1
    return codes


class HuffmanDecoder:
    """Both directions of one canonical Huffman table.

    Attributes
    ----------
    spec:
        The table definition.
    codes, lengths:
        Code and bit length of ``spec.symbols[i]``.
    maxcode, valptr, mincode:
        Annex F.2.2.3 decoding tables indexed by code length 1..16;
        ``maxcode[l] == -1`` when no code has length ``l``.
    lookup:
        65536 entries indexed by a 16-bit window: ``(length << 8) | symbol``,
        or 0 where no code is a prefix of the window.
    encoding:
        symbol -> ``(code, length)``.
    """

    __slots__ = (
        "code_array",
        "codes",
        "encoding",
        "length_array",
        "lengths",
        "lookup",
        "maxcode",
        "mincode",
        "spec",
        "symbol_array",
        "valptr",
    )

    def __init__(self, spec: HuffmanSpec) -> None:
        assigned = canonical_codes(spec)
        self.spec = spec
        self.codes = tuple(c for c, _ in assigned)
        self.lengths = tuple(n for _, n in assigned)

        self.maxcode = [-1] * 17
        self.mincode = [0] * 17
        self.valptr = [0] * 17
        k = 0
        for length in range(1, 17):
            count = spec.counts[length - 1]
            if count:
                self.valptr[length] = k
                self.mincode[length] = self.codes[k]
                k += count
                self.maxcode[length] = self.codes[k - 1]

        table = np.zeros(1 << 16, dtype=np.int32)
        for symbol, code, length in zip(
            spec.symbols, self.codes, self.lengths, strict=True
        ):
            shift = 16 - length
            table[code << shift : (code + 1) << shift] = (length << 8) | symbol
        self.lookup: list[int] = table.tolist()

        self.encoding = {
            symbol: (code, length)
            for symbol, code, length in zip(
                spec.symbols, self.codes, self.lengths, strict=True
            )
        }

        self.code_array: npt.NDArray[np.int64] = np.asarray(self.codes, np.int64)
        self.length_array: npt.NDArray[np.int64] = np.asarray(self.lengths, np.int64)
        self.symbol_array: npt.NDArray[np.int64] = np.asarray(spec.symbols, np.int64)

    def __len__(self) -> int:
        return len(self.codes)

    def symbol_for(self, code: int, length: int) -> int | None:
        """Symbol whose code is exactly ``code`` of ``length`` bits, if any."""
        if not 1 <= length <= 16 or self.maxcode[length] < code:
            return None
        if code < self.mincode[length]:
            return None
        return self.spec.symbols[self.valptr[length] + code - self.mincode[length]]


def build_huffman_decoder(spec: HuffmanSpec) -> HuffmanDecoder:
    """Construct the canonical decoder for *spec* (ITU T.81 Annex C)."""
    return HuffmanDecoder(spec)
