"""Foundation domain types for ratex.

Codestream tables, the random-access container, cache keys and per-frame
statistics. All containers are frozen dataclasses; pixel and coefficient
payloads are numpy arrays described by the aliases at the bottom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

from ratex.exceptions import InvalidHuffmanSpecError

MCU_SIZE = 16
"""Edge length in pixels of a 4:2:0 minimum coded unit."""

BLOCKS_PER_MCU = 6
INDEX_GROUP_SIZE = 9
"""One absolute 32-bit offset followed by eight 16-bit relative offsets."""

MIP_LEVELS = 8
DC_HEADER_BITS = 36

# ---------------------------------------------------------------------------
# Array aliases
# ---------------------------------------------------------------------------

PixelBlock: TypeAlias = npt.NDArray[np.uint8]
"""16x16x3 RGB8 texels of one MCU, row-major."""

RGBImage: TypeAlias = npt.NDArray[np.uint8]
"""HxWx3 RGB8 image."""

CoeffBlock: TypeAlias = npt.NDArray[np.int32]
"""64 quantized DCT coefficients in natural (row-major) order."""

McuCoefficients: TypeAlias = npt.NDArray[np.int32]
"""6x64 coefficient blocks in order Y1, Y2, Y3, Y4, Cb, Cr."""


# ---------------------------------------------------------------------------
# Codestream tables
# ---------------------------------------------------------------------------


class TableClass(enum.IntEnum):
    """Huffman table class as coded in the DHT ``Tc`` nibble."""

    DC = 0
    AC = 1


@dataclass(frozen=True, slots=True)
class HuffmanSpec:
    """Code-length counts plus symbols in canonical code order.

    Parameters
    ----------
    counts:
        16 entries, ``counts[i]`` = number of codes of length ``i + 1``.
    symbols:
        8-bit symbols in code order; ``len(symbols) == sum(counts)``.
    """

    counts: tuple[int, ...]
    symbols: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != 16:
            raise InvalidHuffmanSpecError(
                f"expected 16 code-length counts, got {len(self.counts)}"
            )
        if sum(self.counts) != len(self.symbols) or len(self.symbols) > 256:
            raise InvalidHuffmanSpecError(
                f"counts sum to {sum(self.counts)} but {len(self.symbols)} "
                "symbols were given (max 256)"
            )
        if any(not 0 <= s <= 0xFF for s in self.symbols):
            raise InvalidHuffmanSpecError("Huffman symbols must be 8-bit values")


@dataclass(frozen=True, slots=True)
class ComponentInfo:
    """Frame and scan parameters of one colour component."""

    component_id: int
    h_sampling: int
    v_sampling: int
    quant_table_id: int
    dc_table_id: int = 0
    ac_table_id: int = 0


HuffmanKey: TypeAlias = tuple[TableClass, int]


@dataclass(frozen=True, slots=True)
class ParsedJpeg:
    """Header state of a baseline 4:2:0 JPEG.

    Parameters
    ----------
    width, height:
        Image dimensions in pixels.
    quant_tables:
        Table id -> 64 quantizer values in zigzag order.
    huffman_specs:
        ``(TableClass, table id)`` -> spec.
    components:
        Y, Cb, Cr in frame order.
    scan_data:
        Entropy-coded segment between the SOS header and EOI, byte
        stuffing still present.
    """

    width: int
    height: int
    quant_tables: dict[int, tuple[int, ...]]
    huffman_specs: dict[HuffmanKey, HuffmanSpec]
    components: tuple[ComponentInfo, ...]
    scan_data: bytes

    @property
    def mcu_cols(self) -> int:
        return -(-self.width // MCU_SIZE)

    @property
    def mcu_rows(self) -> int:
        return -(-self.height // MCU_SIZE)

    @property
    def mcu_count(self) -> int:
        return self.mcu_cols * self.mcu_rows


# ---------------------------------------------------------------------------
# Random-access container
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class IndexTable:
    """Hierarchical MCU offset table.

    For every group of nine consecutive MCUs, ``absolute`` holds the byte
    offset of the first MCU; ``relative`` holds, flattened group by group,
    the offsets of the remaining (up to eight) MCUs relative to it. The
    last group is truncated when ``mcu_count`` is not a multiple of nine.
    """

    absolute: tuple[int, ...]
    relative: tuple[int, ...]
    mcu_count: int

    @property
    def group_count(self) -> int:
        return len(self.absolute)

    @property
    def bits(self) -> int:
        return 32 * len(self.absolute) + 16 * len(self.relative)

    def offset(self, mcu_id: int) -> int:
        """Byte offset of ``mcu_id`` inside the entropy blob."""
        if not 0 <= mcu_id < self.mcu_count:
            raise IndexError(f"MCU {mcu_id} outside [0, {self.mcu_count})")
        group, slot = divmod(mcu_id, INDEX_GROUP_SIZE)
        base = self.absolute[group]
        if slot == 0:
            return base
        return base + self.relative[group * (INDEX_GROUP_SIZE - 1) + slot - 1]


@dataclass(frozen=True, slots=True)
class RaTexture:
    """One random-access texture (a single mip level).

    Parameters
    ----------
    width, height:
        Pixel dimensions; MCUs beyond them carry edge-replicated padding.
    mcu_cols, mcu_rows:
        MCU grid.
    quant_tables, huffman_specs, components:
        Carried verbatim from the source JPEG.
    index_table:
        Offsets of every MCU segment in ``entropy_blob``.
    entropy_blob:
        Concatenated byte-aligned MCU segments.
    texture_id:
        13-bit id used in cache keys.
    source_bits:
        Entropy-coded bits the source JPEG spent on all MCUs (unstuffed,
        trailing fill bits excluded).
    dc_removed_bits:
        Bits the source spent on the Y1, Cb and Cr DC codes of every MCU.
    padding_bits:
        1-bits appended to byte-align the segments.
    """

    width: int
    height: int
    mcu_cols: int
    mcu_rows: int
    quant_tables: dict[int, tuple[int, ...]]
    huffman_specs: dict[HuffmanKey, HuffmanSpec]
    components: tuple[ComponentInfo, ...]
    index_table: IndexTable
    entropy_blob: bytes
    texture_id: int
    source_bits: int
    dc_removed_bits: int
    padding_bits: int

    @property
    def mcu_count(self) -> int:
        return self.mcu_cols * self.mcu_rows

    def segment(self, mcu_id: int) -> bytes:
        """Bytes of one MCU segment (index-derived length)."""
        start = self.index_table.offset(mcu_id)
        if mcu_id + 1 < self.mcu_count:
            end = self.index_table.offset(mcu_id + 1)
        else:
            end = len(self.entropy_blob)
        return self.entropy_blob[start:end]


@dataclass(frozen=True, slots=True)
class MipChain:
    """Level 0 plus successively halved levels of one texture."""

    levels: tuple[RaTexture, ...]

    @property
    def texture_id(self) -> int:
        return self.levels[0].texture_id

    @property
    def level_count(self) -> int:
        return len(self.levels)

    def level(self, mip_level: int) -> RaTexture:
        """Return the texture for ``mip_level``, clamped to the last level."""
        return self.levels[min(max(mip_level, 0), len(self.levels) - 1)]


@dataclass(frozen=True, slots=True)
class OverheadReport:
    """Random-access storage overhead of one texture, in bits.

    ``effective_bpp`` includes the alignment padding;
    ``effective_bpp_unpadded`` is the figure comparable to the un-padded
    upper bound of 53.777 bits per MCU.
    """

    index_bits: int
    dc_added_bits: int
    dc_removed_bits: int
    padding_bits: int
    pixel_count: int
    mcu_count: int

    @property
    def effective_bpp(self) -> float:
        net = (
            self.index_bits
            + self.dc_added_bits
            - self.dc_removed_bits
            + self.padding_bits
        )
        return net / self.pixel_count

    @property
    def effective_bpp_unpadded(self) -> float:
        net = self.index_bits + self.dc_added_bits - self.dc_removed_bits
        return net / self.pixel_count

    @property
    def upper_bound_bpp(self) -> float:
        """Index plus absolute-DC bits per MCU texel, without the DC credit."""
        return (self.index_bits + self.dc_added_bits) / (self.mcu_count * MCU_SIZE**2)

    @property
    def index_bits_per_mcu(self) -> float:
        return self.index_bits / self.mcu_count


# ---------------------------------------------------------------------------
# Cache keys and rendering
# ---------------------------------------------------------------------------

_MCU_BITS = 16
_TEXTURE_BITS = 13
_MIP_BITS = 3


@dataclass(frozen=True, slots=True)
class CacheKey:
    """Unpacked form of the 32-bit block cache key.

    Bits 0-15 hold the MCU id, 16-28 the texture id, 29-31 the mip level.
    """

    mcu_id: int
    texture_id: int
    mip_level: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.mcu_id < 1 << _MCU_BITS:
            raise ValueError(f"mcu_id {self.mcu_id} does not fit in 16 bits")
        if not 0 <= self.texture_id < 1 << _TEXTURE_BITS:
            raise ValueError(f"texture_id {self.texture_id} does not fit in 13 bits")
        if not 0 <= self.mip_level < 1 << _MIP_BITS:
            raise ValueError(f"mip_level {self.mip_level} does not fit in 3 bits")

    @property
    def packed(self) -> int:
        return pack_key(self.mcu_id, self.texture_id, self.mip_level)

    @classmethod
    def from_packed(cls, key: int) -> CacheKey:
        return cls(*unpack_key(key))


def pack_key(mcu_id: int, texture_id: int, mip_level: int) -> int:
    """Pack the three key fields into one 32-bit integer."""
    return (
        (mip_level << (_MCU_BITS + _TEXTURE_BITS))
        | (texture_id << _MCU_BITS)
        | mcu_id
    )


def unpack_key(key: int) -> tuple[int, int, int]:
    """Inverse of :func:`pack_key`: ``(mcu_id, texture_id, mip_level)``."""
    return (
        key & 0xFFFF,
        (key >> _MCU_BITS) & 0x1FFF,
        (key >> (_MCU_BITS + _TEXTURE_BITS)) & 0x7,
    )


class FilterMode(enum.Enum):
    """Texel reconstruction filter used by the resolve pass."""

    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BILINEAR_CLAMPED = "bilinear_clamped"


class ReserveResult(enum.Enum):
    """Outcome of a mark-pass reservation."""

    NEWLY_RESERVED = "newly_reserved"
    ALREADY_PRESENT = "already_present"


@dataclass(frozen=True, slots=True)
class FrameStats:
    """Counters and per-pass timings of one rendered frame.

    ``mcus_decoded`` always equals the number of new reservations made by
    the mark pass of that frame.
    """

    mcus_decoded: int
    mcus_reused: int
    pixels_resolved: int
    pass_seconds: dict[str, float] = field(default_factory=dict)
    decoded_keys: frozenset[int] = frozenset()
    visible_keys: frozenset[int] = frozenset()

    @property
    def pipeline_seconds(self) -> float:
        """Mark + decode + resolve duration."""
        return sum(
            self.pass_seconds.get(name, 0.0) for name in ("mark", "decode", "resolve")
        )


@dataclass(frozen=True, slots=True)
class StereoStats:
    """Frame statistics of a stereo pair plus the eyes' MCU sharing."""

    frame: FrameStats
    left_keys: frozenset[int]
    right_keys: frozenset[int]

    @property
    def shared_over_union(self) -> float:
        union = self.left_keys | self.right_keys
        if not union:
            return 1.0
        return len(self.left_keys & self.right_keys) / len(union)

    @property
    def shared_over_right(self) -> float:
        if not self.right_keys:
            return 1.0
        return len(self.left_keys & self.right_keys) / len(self.right_keys)
