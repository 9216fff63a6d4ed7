"""Binary ``.ratex`` (single texture) and ``.ratexm`` (mip chain) files.

All integers are little-endian. The layout is documented byte by byte in
``docs/container-format.md``; this module is the only writer and reader.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ratex.exceptions import (
    CodestreamError,
    CorruptContainerError,
    VersionMismatchError,
)
from ratex.types import (
    INDEX_GROUP_SIZE,
    ComponentInfo,
    HuffmanKey,
    HuffmanSpec,
    IndexTable,
    MipChain,
    RaTexture,
    TableClass,
)

TEXTURE_MAGIC = b"RTEX"
CHAIN_MAGIC = b"RTXM"
FORMAT_VERSION = 1

_PREAMBLE = struct.Struct("<4sHH")
_TEXTURE_HEADER = struct.Struct("<IIIIHHQQQ")
_INDEX_HEADER = struct.Struct("<II")
_CHAIN_HEADER = struct.Struct("<BBH")
_DIRECTORY_ENTRY = struct.Struct("<QQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class _Reader:
    """Bounds-checked cursor over container bytes."""

    def __init__(self, data: bytes, pos: int = 0) -> None:
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptContainerError(
                f"container truncated: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple[int, ...]:
        return fmt.unpack(self.take(fmt.size))

    def u8(self) -> int:
        return self.take(1)[0]


def _check_preamble(reader: _Reader, magic: bytes) -> int:
    found, version, flags = reader.unpack(_PREAMBLE)
    if found != magic:
        raise CorruptContainerError(f"bad magic {found!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"container format version {version} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    return int(flags)


# ---------------------------------------------------------------------------
# Single texture
# ---------------------------------------------------------------------------


def _tables_bytes(ra: RaTexture) -> bytes:
    out = bytearray()
    out.append(len(ra.quant_tables))
    for table_id in sorted(ra.quant_tables):
        out.append(table_id)
        out += np.asarray(ra.quant_tables[table_id], dtype="<u2").tobytes()
    out.append(len(ra.huffman_specs))
    for (table_class, table_id) in sorted(ra.huffman_specs):
        spec = ra.huffman_specs[(table_class, table_id)]
        out += bytes([int(table_class), table_id, *spec.counts, *spec.symbols])
    out.append(len(ra.components))
    for c in ra.components:
        out += bytes(
            [
                c.component_id,
                c.h_sampling,
                c.v_sampling,
                c.quant_table_id,
                c.dc_table_id,
                c.ac_table_id,
            ]
        )
    return bytes(out)


def serialize_texture(ra: RaTexture) -> bytes:
    """Encode one texture as a ``.ratex`` byte string."""
    index = ra.index_table
    head = bytearray(_PREAMBLE.pack(TEXTURE_MAGIC, FORMAT_VERSION, 0))
    head += _TEXTURE_HEADER.pack(
        ra.width,
        ra.height,
        ra.mcu_cols,
        ra.mcu_rows,
        ra.texture_id,
        0,
        ra.source_bits,
        ra.dc_removed_bits,
        ra.padding_bits,
    )
    head += _tables_bytes(ra)
    head += _INDEX_HEADER.pack(index.group_count, index.mcu_count)
    head += np.asarray(index.absolute, dtype="<u4").tobytes()
    head += np.asarray(index.relative, dtype="<u2").tobytes()
    head += _U32.pack(zlib.crc32(head))
    blob = ra.entropy_blob
    return bytes(head) + _U64.pack(len(blob)) + blob + _U32.pack(zlib.crc32(blob))


def framing_bytes(ra: RaTexture) -> int:
    """Bytes of a serialized texture that are neither index nor entropy data."""
    tables = len(_tables_bytes(ra))
    return (
        _PREAMBLE.size
        + _TEXTURE_HEADER.size
        + tables
        + _INDEX_HEADER.size
        + _U32.size
        + _U64.size
        + _U32.size
    )


def _read_tables(
    reader: _Reader,
) -> tuple[
    dict[int, tuple[int, ...]],
    dict[HuffmanKey, HuffmanSpec],
    tuple[ComponentInfo, ...],
]:
    quant: dict[int, tuple[int, ...]] = {}
    for _ in range(reader.u8()):
        table_id = reader.u8()
        quant[table_id] = tuple(np.frombuffer(reader.take(128), dtype="<u2").tolist())
    huffman: dict[HuffmanKey, HuffmanSpec] = {}
    for _ in range(reader.u8()):
        table_class, table_id = reader.u8(), reader.u8()
        if table_class > 1:
            raise CorruptContainerError(f"invalid Huffman table class {table_class}")
        counts = tuple(reader.take(16))
        symbols = tuple(reader.take(sum(counts)))
        huffman[(TableClass(table_class), table_id)] = HuffmanSpec(counts, symbols)
    components = tuple(ComponentInfo(*reader.take(6)) for _ in range(reader.u8()))
    return quant, huffman, components


def _read_index(reader: _Reader) -> IndexTable:
    groups, mcus = reader.unpack(_INDEX_HEADER)
    expected_groups = -(-mcus // INDEX_GROUP_SIZE)
    if groups != expected_groups:
        raise CorruptContainerError(
            f"index has {groups} groups for {mcus} MCUs (expected {expected_groups})"
        )
    absolute = np.frombuffer(reader.take(4 * groups), dtype="<u4")
    relative = np.frombuffer(reader.take(2 * (mcus - groups)), dtype="<u2")
    return IndexTable(
        absolute=tuple(absolute.tolist()),
        relative=tuple(relative.tolist()),
        mcu_count=mcus,
    )


def _validate_tables(
    quant: dict[int, tuple[int, ...]],
    huffman: dict[HuffmanKey, HuffmanSpec],
    components: tuple[ComponentInfo, ...],
) -> None:
    if len(components) != 3:
        raise CorruptContainerError(f"{len(components)} components, expected 3")
    for c in components:
        if (
            c.quant_table_id not in quant
            or (TableClass.DC, c.dc_table_id) not in huffman
            or (TableClass.AC, c.ac_table_id) not in huffman
        ):
            raise CorruptContainerError(
                f"component {c.component_id} references a missing table"
            )


def _validate_offsets(index: IndexTable, blob_len: int) -> None:
    offsets = [index.offset(m) for m in range(index.mcu_count)]
    previous = -1
    for m, offset in enumerate(offsets):
        if offset <= previous or offset >= blob_len:
            raise CorruptContainerError(
                f"MCU {m} offset {offset} is not increasing or lies outside the "
                f"{blob_len}-byte entropy blob"
            )
        previous = offset


def _read_texture(reader: _Reader) -> RaTexture:
    start = reader.pos
    _check_preamble(reader, TEXTURE_MAGIC)
    (
        width,
        height,
        mcu_cols,
        mcu_rows,
        texture_id,
        _reserved,
        source_bits,
        dc_removed_bits,
        padding_bits,
    ) = reader.unpack(_TEXTURE_HEADER)
    try:
        quant, huffman, components = _read_tables(reader)
    except CodestreamError as exc:
        raise CorruptContainerError(f"invalid table data: {exc}") from exc
    index = _read_index(reader)
    header_end = reader.pos
    (stored_crc,) = reader.unpack(_U32)
    if zlib.crc32(reader.data[start:header_end]) != stored_crc:
        raise CorruptContainerError("header/index checksum mismatch")

    (blob_len,) = reader.unpack(_U64)
    blob = reader.take(blob_len)
    (blob_crc,) = reader.unpack(_U32)
    if zlib.crc32(blob) != blob_crc:
        raise CorruptContainerError("entropy blob checksum mismatch")

    if texture_id >= 1 << 13:
        raise CorruptContainerError(f"texture id {texture_id} exceeds 13 bits")
    _validate_tables(quant, huffman, components)
    if width < 1 or height < 1:
        raise CorruptContainerError(f"invalid dimensions {width}x{height}")
    if (mcu_cols, mcu_rows) != (-(-width // 16), -(-height // 16)):
        raise CorruptContainerError(
            f"MCU grid {mcu_cols}x{mcu_rows} does not match {width}x{height}"
        )
    if index.mcu_count != mcu_cols * mcu_rows:
        raise CorruptContainerError(
            f"index covers {index.mcu_count} MCUs, grid has {mcu_cols * mcu_rows}"
        )
    _validate_offsets(index, blob_len)
    return RaTexture(
        width=width,
        height=height,
        mcu_cols=mcu_cols,
        mcu_rows=mcu_rows,
        quant_tables=quant,
        huffman_specs=huffman,
        components=components,
        index_table=index,
        entropy_blob=blob,
        texture_id=texture_id,
        source_bits=source_bits,
        dc_removed_bits=dc_removed_bits,
        padding_bits=padding_bits,
    )


def deserialize_texture(data: bytes) -> RaTexture:
    """Decode a ``.ratex`` byte string.

    Raises
    ------
    VersionMismatchError
        Unsupported format version.
    CorruptContainerError
        Bad magic, checksum mismatch, truncation, trailing bytes or
        inconsistent index.
    """
    reader = _Reader(bytes(data))
    ra = _read_texture(reader)
    if reader.pos != len(reader.data):
        raise CorruptContainerError(
            f"{len(reader.data) - reader.pos} unexpected trailing bytes"
        )
    return ra


# ---------------------------------------------------------------------------
# Mip chain
# ---------------------------------------------------------------------------


def serialize_chain(chain: MipChain) -> bytes:
    """Encode a mip chain as ``.ratexm``: directory, then one container per level."""
    bodies = [serialize_texture(level) for level in chain.levels]
    head = bytearray(_PREAMBLE.pack(CHAIN_MAGIC, FORMAT_VERSION, 0))
    head += _CHAIN_HEADER.pack(len(bodies), 0, 0)
    offset = len(head) + _DIRECTORY_ENTRY.size * len(bodies) + _U32.size
    for body in bodies:
        head += _DIRECTORY_ENTRY.pack(offset, len(body))
        offset += len(body)
    head += _U32.pack(zlib.crc32(head))
    return bytes(head) + b"".join(bodies)


def deserialize_chain(data: bytes) -> MipChain:
    """Decode a ``.ratexm`` byte string; errors as :func:`deserialize_texture`."""
    data = bytes(data)
    reader = _Reader(data)
    _check_preamble(reader, CHAIN_MAGIC)
    count, _, _ = reader.unpack(_CHAIN_HEADER)
    if not 1 <= count <= 8:
        raise CorruptContainerError(f"mip chain declares {count} levels (1..8)")
    entries = [reader.unpack(_DIRECTORY_ENTRY) for _ in range(count)]
    header_end = reader.pos
    (stored_crc,) = reader.unpack(_U32)
    if zlib.crc32(data[:header_end]) != stored_crc:
        raise CorruptContainerError("mip directory checksum mismatch")
    levels = []
    expected = reader.pos
    for k, (offset, length) in enumerate(entries):
        if offset != expected or offset + length > len(data):
            raise CorruptContainerError(f"mip level {k} directory entry out of range")
        levels.append(deserialize_texture(data[offset : offset + length]))
        expected = offset + length
    if expected != len(data):
        raise CorruptContainerError(f"{len(data) - expected} unexpected trailing bytes")
    return MipChain(levels=tuple(levels))


# ---------------------------------------------------------------------------
# Dispatch and files
# ---------------------------------------------------------------------------


def serialize(obj: RaTexture | MipChain) -> bytes:
    """Serialize a texture (``.ratex``) or a mip chain (``.ratexm``)."""
    if isinstance(obj, MipChain):
        return serialize_chain(obj)
    return serialize_texture(obj)


def deserialize(data: bytes) -> RaTexture | MipChain:
    """Decode either container kind, chosen by its magic."""
    magic = bytes(data[:4])
    if magic == CHAIN_MAGIC:
        return deserialize_chain(data)
    if magic == TEXTURE_MAGIC:
        return deserialize_texture(data)
    raise CorruptContainerError(f"unknown container magic {magic!r}")


def write_container(path: str | Path, obj: RaTexture | MipChain) -> int:
    """Write *obj* to *path*; return the number of bytes written."""
    data = serialize(obj)
    Path(path).write_bytes(data)
    return len(data)


def read_container(path: str | Path) -> RaTexture | MipChain:
    return deserialize(Path(path).read_bytes())


def read_chain(path: str | Path) -> MipChain:
    """Read a ``.ratexm`` file; a single ``.ratex`` becomes a one-level chain."""
    obj = read_container(path)
    return obj if isinstance(obj, MipChain) else MipChain(levels=(obj,))
