"""Baseline JPEG codestream parsing and the sequential reference decoder.

Only the subset the random-access container is built from is accepted:
SOF0, 8-bit precision, Huffman coding, one interleaved scan of three
components sampled 2x2 / 1x1 / 1x1, and no restart intervals. Everything
else is rejected with :class:`~ratex.exceptions.UnsupportedFormatError`.

The sequential walk also records where every data unit's bits start and
end so the transcoder can copy entropy bits verbatim.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ratex.bitstream import BitCursor, unstuff
from ratex.decoders import SymbolDecoder, TableSymbolDecoder
from ratex.exceptions import (
    CodestreamError,
    DcOverflowError,
    MalformedStreamError,
    UnsupportedFormatError,
)
from ratex.huffman import HuffmanDecoder, build_huffman_decoder, canonical_codes
from ratex.pixels import ZIGZAG, assemble_mcus, natural_quant, reconstruct_mcus
from ratex.types import (
    BLOCKS_PER_MCU,
    ComponentInfo,
    HuffmanKey,
    HuffmanSpec,
    McuCoefficients,
    ParsedJpeg,
    RGBImage,
    TableClass,
)

# Markers
SOI = 0xD8
EOI = 0xD9
SOS = 0xDA
DQT = 0xDB
DHT = 0xC4
DRI = 0xDD
DAC = 0xCC
DNL = 0xDC
SOF0 = 0xC0

# Range of a quantized DC coefficient at 8-bit precision
DC_MIN, DC_MAX = -2048, 2047

_SOF_NAMES = {
    0xC1: "extended sequential (SOF1)",
    0xC2: "progressive (SOF2)",
    0xC3: "lossless (SOF3)",
    0xC5: "differential sequential (SOF5)",
    0xC6: "differential progressive (SOF6)",
    0xC7: "differential lossless (SOF7)",
    0xC9: "arithmetic sequential (SOF9)",
    0xCA: "arithmetic progressive (SOF10)",
    0xCB: "arithmetic lossless (SOF11)",
    0xCD: "arithmetic differential sequential (SOF13)",
    0xCE: "arithmetic differential progressive (SOF14)",
    0xCF: "arithmetic differential lossless (SOF15)",
}

_SCAN_END = re.compile(rb"\xff[^\x00\xff]")

BLOCK_COMPONENT = (0, 0, 0, 0, 1, 2)
"""Component index of each data unit of a 4:2:0 MCU."""

_ZIGZAG = ZIGZAG.tolist()


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _u16(data: bytes, pos: int) -> int:
    if pos + 2 > len(data):
        raise MalformedStreamError(f"truncated at byte {pos}: expected 2 more bytes")
    return (data[pos] << 8) | data[pos + 1]


class _HeaderState:
    """Tables accumulated while walking the marker segments."""

    def __init__(self) -> None:
        self.quant: dict[int, tuple[int, ...]] = {}
        self.huffman: dict[HuffmanKey, HuffmanSpec] = {}
        self.width = 0
        self.height = 0
        self.frame: list[ComponentInfo] | None = None
        self.scan: list[ComponentInfo] | None = None

    def read_dqt(self, seg: bytes) -> None:
        pos = 0
        while pos < len(seg):
            pq, tq = seg[pos] >> 4, seg[pos] & 0x0F
            if pq != 0:
                raise UnsupportedFormatError("16-bit quantization tables (Pq=1)")
            if tq > 3:
                raise MalformedStreamError(f"quantization table id {tq} > 3")
            values = seg[pos + 1 : pos + 65]
            if len(values) != 64:
                raise MalformedStreamError("truncated DQT segment")
            table = tuple(values)
            if tq in self.quant and self.quant[tq] != table:
                raise MalformedStreamError(f"quantization table {tq} redefined")
            if 0 in table:
                raise MalformedStreamError(f"quantization table {tq} has a zero entry")
            self.quant[tq] = table
            pos += 65

    def read_dht(self, seg: bytes) -> None:
        pos = 0
        while pos < len(seg):
            tc, th = seg[pos] >> 4, seg[pos] & 0x0F
            if tc > 1 or th > 3:
                raise MalformedStreamError(f"invalid Huffman table class/id {tc}/{th}")
            counts = tuple(seg[pos + 1 : pos + 17])
            if len(counts) != 16:
                raise MalformedStreamError("truncated DHT segment")
            total = sum(counts)
            symbols = tuple(seg[pos + 17 : pos + 17 + total])
            if len(symbols) != total:
                raise MalformedStreamError("truncated DHT symbol list")
            spec = HuffmanSpec(counts=counts, symbols=symbols)
            canonical_codes(spec)
            key = (TableClass(tc), th)
            if key in self.huffman and self.huffman[key] != spec:
                raise MalformedStreamError(
                    f"Huffman table {TableClass(tc).name}{th} redefined"
                )
            self.huffman[key] = spec
            pos += 17 + total

    def read_sof0(self, seg: bytes) -> None:
        if self.frame is not None:
            raise MalformedStreamError("duplicate SOF segment")
        if len(seg) < 6:
            raise MalformedStreamError("truncated SOF0 segment")
        precision = seg[0]
        if precision != 8:
            raise UnsupportedFormatError(f"{precision}-bit sample precision")
        self.height = _u16(seg, 1)
        self.width = _u16(seg, 3)
        count = seg[5]
        if self.height == 0:
            raise UnsupportedFormatError("height defined by a DNL marker")
        if self.width == 0:
            raise MalformedStreamError("frame width is zero")
        if count != 3:
            raise UnsupportedFormatError(
                f"{count} colour components; only 3-component YCbCr is handled"
            )
        if len(seg) < 6 + 3 * count:
            raise MalformedStreamError("truncated SOF0 component list")
        frame = []
        for i in range(count):
            cid, hv, tq = seg[6 + 3 * i : 9 + 3 * i]
            frame.append(ComponentInfo(cid, hv >> 4, hv & 0x0F, tq))
        sampling = [(c.h_sampling, c.v_sampling) for c in frame]
        if sampling != [(2, 2), (1, 1), (1, 1)]:
            raise UnsupportedFormatError(
                f"chroma sampling {sampling}; only 4:2:0 (2x2, 1x1, 1x1) is handled"
            )
        if len({c.component_id for c in frame}) != 3:
            raise MalformedStreamError("duplicate component ids in SOF0")
        self.frame = frame

    def read_sos(self, seg: bytes) -> None:
        if self.frame is None:
            raise MalformedStreamError("SOS before SOF")
        if self.scan is not None:
            raise UnsupportedFormatError("multiple scans")
        count = seg[0]
        if count != 3:
            raise UnsupportedFormatError(
                f"scan with {count} components; only one interleaved scan is handled"
            )
        if len(seg) != 4 + 2 * count:
            raise MalformedStreamError("SOS header length mismatch")
        by_id = {c.component_id: c for c in self.frame}
        scan = []
        for i in range(count):
            cid, tables = seg[1 + 2 * i], seg[2 + 2 * i]
            frame_comp = by_id.get(cid)
            if frame_comp is None:
                raise MalformedStreamError(f"scan references unknown component {cid}")
            scan.append(
                ComponentInfo(
                    component_id=cid,
                    h_sampling=frame_comp.h_sampling,
                    v_sampling=frame_comp.v_sampling,
                    quant_table_id=frame_comp.quant_table_id,
                    dc_table_id=tables >> 4,
                    ac_table_id=tables & 0x0F,
                )
            )
        if [c.component_id for c in scan] != [c.component_id for c in self.frame]:
            raise MalformedStreamError("scan component order differs from the frame")
        ss, se, ahal = seg[1 + 2 * count : 4 + 2 * count]
        if (ss, se, ahal) != (0, 63, 0):
            raise UnsupportedFormatError(
                f"spectral selection {ss}..{se} / approximation {ahal:#x}"
            )
        for comp in scan:
            if comp.quant_table_id not in self.quant:
                raise MalformedStreamError(
                    f"component {comp.component_id} references missing "
                    f"quantization table {comp.quant_table_id}"
                )
            needed = (
                (TableClass.DC, comp.dc_table_id),
                (TableClass.AC, comp.ac_table_id),
            )
            for key in needed:
                if key not in self.huffman:
                    raise MalformedStreamError(
                        f"component {comp.component_id} references missing "
                        f"Huffman table {key[0].name}{key[1]}"
                    )
        self.scan = scan


def parse_jpeg(data: bytes) -> ParsedJpeg:
    """Parse a baseline 4:2:0 JPEG into its tables and raw scan bytes.

    APPn and COM segments are skipped. The returned ``scan_data`` still
    contains byte stuffing; trailing ``0xFF`` fill bytes before EOI are
    dropped.

    Raises
    ------
    UnsupportedFormatError
        Progressive, lossless or arithmetic-coded frames, restart intervals,
        sampling other than 4:2:0, precision other than 8 bits.
    MalformedStreamError
        Missing SOI/EOI, truncation, inconsistent or missing tables. Any
        byte sequence yields either a :class:`ParsedJpeg` or a
        :class:`~ratex.exceptions.CodestreamError`.
    """
    data = bytes(data)
    try:
        return _parse(data)
    except CodestreamError:
        raise
    except (IndexError, ValueError) as exc:
        raise MalformedStreamError(f"malformed JPEG: {exc}") from exc


def _parse(data: bytes) -> ParsedJpeg:
    if data[:2] != b"\xff\xd8":
        raise MalformedStreamError("missing SOI marker (stream must start with FFD8)")
    state = _HeaderState()
    pos = 2
    while True:
        if pos >= len(data):
            raise MalformedStreamError("unexpected end of stream before SOS")
        if data[pos] != 0xFF:
            raise MalformedStreamError(f"expected marker at byte {pos}")
        while pos < len(data) and data[pos] == 0xFF:
            pos += 1
        if pos >= len(data):
            raise MalformedStreamError("stream ends inside a marker")
        marker = data[pos]
        pos += 1
        if marker in (SOI, EOI) or 0xD0 <= marker <= 0xD7 or marker == 0x00:
            raise MalformedStreamError(
                f"unexpected marker FF{marker:02X} at byte {pos - 2}"
            )
        length = _u16(data, pos)
        if length < 2 or pos + length > len(data):
            raise MalformedStreamError(
                f"segment FF{marker:02X} length {length} runs past the stream"
            )
        seg = data[pos + 2 : pos + length]
        pos += length

        if marker == SOF0:
            state.read_sof0(seg)
        elif marker in _SOF_NAMES:
            raise UnsupportedFormatError(f"{_SOF_NAMES[marker]} JPEG")
        elif marker == DAC:
            raise UnsupportedFormatError("arithmetic coding (DAC segment)")
        elif marker == DQT:
            state.read_dqt(seg)
        elif marker == DHT:
            state.read_dht(seg)
        elif marker == DRI:
            if len(seg) != 2:
                raise MalformedStreamError("DRI segment must be 2 bytes")
            if _u16(seg, 0) != 0:
                raise UnsupportedFormatError(
                    f"restart interval {_u16(seg, 0)}; restart markers are not handled"
                )
        elif marker == DNL:
            raise UnsupportedFormatError("DNL marker")
        elif marker == SOS:
            state.read_sos(seg)
            break
        # APPn, COM and other segments carry nothing the decoder needs.

    match = _SCAN_END.search(data, pos)
    if match is None:
        raise MalformedStreamError("missing EOI marker after the scan")
    end_marker = data[match.start() + 1]
    if end_marker != EOI:
        if 0xD0 <= end_marker <= 0xD7:
            raise UnsupportedFormatError("restart markers inside the scan")
        raise MalformedStreamError(
            f"scan terminated by FF{end_marker:02X}; only a single scan followed "
            "by EOI is handled"
        )
    scan_data = data[pos : match.start()].rstrip(b"\xff")

    assert state.scan is not None
    return ParsedJpeg(
        width=state.width,
        height=state.height,
        quant_tables=dict(state.quant),
        huffman_specs=dict(state.huffman),
        components=tuple(state.scan),
        scan_data=scan_data,
    )


# ---------------------------------------------------------------------------
# Entropy decoding
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def cached_huffman_decoder(spec: HuffmanSpec) -> HuffmanDecoder:
    """Shared, immutable decoder for *spec*."""
    return build_huffman_decoder(spec)


def component_tables(
    huffman_specs: dict[HuffmanKey, HuffmanSpec],
    components: tuple[ComponentInfo, ...],
) -> list[tuple[HuffmanDecoder, HuffmanDecoder]]:
    """``(dc, ac)`` decoders for Y, Cb and Cr."""
    return [
        (
            cached_huffman_decoder(huffman_specs[(TableClass.DC, c.dc_table_id)]),
            cached_huffman_decoder(huffman_specs[(TableClass.AC, c.ac_table_id)]),
        )
        for c in components
    ]


def component_quant(
    quant_tables: dict[int, tuple[int, ...]],
    components: tuple[ComponentInfo, ...],
) -> tuple[npt.NDArray[np.int32], ...]:
    """Natural-order quantizers for Y, Cb and Cr."""
    return tuple(natural_quant(quant_tables[c.quant_table_id]) for c in components)


def decode_dc_diff(
    cursor: BitCursor, table: HuffmanDecoder, symbols: SymbolDecoder
) -> int:
    """Read one DC category code plus its magnitude bits."""
    category = symbols.next_symbol(cursor, table)
    if category > 11:
        raise MalformedStreamError(
            f"DC category {category} exceeds 11 at bit {cursor.position}"
        )
    return cursor.receive_extend(category)


def accumulate_dc(predictor: int, cursor: BitCursor, diff: int) -> int:
    """Add a DC difference to *predictor*, keeping it within 12 bits."""
    value = predictor + diff
    if not DC_MIN <= value <= DC_MAX:
        raise DcOverflowError(
            f"DC coefficient {value} outside [{DC_MIN}, {DC_MAX}] "
            f"at bit {cursor.position}",
            value,
        )
    return value


def decode_ac(
    cursor: BitCursor,
    table: HuffmanDecoder,
    symbols: SymbolDecoder,
    block: list[int],
) -> None:
    """Decode run/size symbols into *block* (natural order) up to EOB or k=63."""
    k = 1
    while k < 64:
        rs = symbols.next_symbol(cursor, table)
        run, size = rs >> 4, rs & 0x0F
        if size == 0:
            if run == 15:
                k += 16
                if k > 63:
                    raise MalformedStreamError(
                        f"zero run past coefficient 63 at bit {cursor.position}"
                    )
                continue
            if run != 0:
                raise MalformedStreamError(
                    f"invalid AC symbol {rs:#04x} at bit {cursor.position}"
                )
            return
        k += run
        if k > 63:
            raise MalformedStreamError(
                f"more than 63 AC coefficients at bit {cursor.position}"
            )
        if size > 10:
            raise MalformedStreamError(
                f"AC magnitude category {size} exceeds 10 at bit {cursor.position}"
            )
        block[_ZIGZAG[k]] = cursor.receive_extend(size)
        k += 1


@dataclass(frozen=True, slots=True)
class ScanLayout:
    """Coefficients and bit positions recovered by a sequential scan walk.

    Attributes
    ----------
    coefficients:
        ``(mcu_count, 6, 64)`` with absolute DCs.
    bounds:
        ``(mcu_count, 6, 3)`` bit positions per data unit: start of its DC
        code, start of its AC codes, end of the data unit.
    data:
        The unstuffed scan bytes the positions refer to.
    end_bit:
        Position just past the last MCU; later bits are fill.
    """

    coefficients: McuCoefficients
    bounds: npt.NDArray[np.int64]
    data: bytes
    end_bit: int


def walk_scan(parsed: ParsedJpeg, symbols: SymbolDecoder | None = None) -> ScanLayout:
    """Decode every MCU in raster order, tracking DC predictors per component.

    Raises
    ------
    MalformedStreamError
        Invalid Huffman code, out-of-range categories, an accumulated DC
        outside 12 bits, or data ending before the last MCU.
    """
    symbols = symbols or TableSymbolDecoder()
    tables = component_tables(parsed.huffman_specs, parsed.components)
    data = unstuff(parsed.scan_data)
    cursor = BitCursor(data)
    count = parsed.mcu_count

    coefficients = np.zeros((count, BLOCKS_PER_MCU, 64), dtype=np.int32)
    bounds = np.zeros((count, BLOCKS_PER_MCU, 3), dtype=np.int64)
    predictors = [0, 0, 0]
    for m in range(count):
        mcu_blocks = []
        for b, comp in enumerate(BLOCK_COMPONENT):
            dc_table, ac_table = tables[comp]
            dc_start = cursor.position
            predictors[comp] = accumulate_dc(
                predictors[comp], cursor, decode_dc_diff(cursor, dc_table, symbols)
            )
            ac_start = cursor.position
            block = [0] * 64
            block[0] = predictors[comp]
            decode_ac(cursor, ac_table, symbols, block)
            bounds[m, b] = (dc_start, ac_start, cursor.position)
            mcu_blocks.append(block)
        coefficients[m] = mcu_blocks
    return ScanLayout(
        coefficients=coefficients,
        bounds=bounds,
        data=data,
        end_bit=cursor.position,
    )


def decode_scan_sequential(
    parsed: ParsedJpeg, symbols: SymbolDecoder | None = None
) -> McuCoefficients:
    """Reference decoder: ``(mcu_count, 6, 64)`` coefficients in raster order.

    Blocks are Y1, Y2, Y3, Y4, Cb, Cr; coefficients are in natural order
    with DC differences already accumulated.
    """
    return walk_scan(parsed, symbols).coefficients


def decode_reference_image(
    parsed: ParsedJpeg, symbols: SymbolDecoder | None = None
) -> RGBImage:
    """Full sequential decode to an RGB image cropped to the frame size."""
    coefficients = decode_scan_sequential(parsed, symbols)
    luma, cb, cr = component_quant(parsed.quant_tables, parsed.components)
    blocks = reconstruct_mcus(coefficients, luma, cb, cr)
    return assemble_mcus(blocks, parsed.mcu_cols, parsed.width, parsed.height)
