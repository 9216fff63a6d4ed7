"""Bit-level reading and writing of entropy-coded data.

Readers operate on *unstuffed* bytes: :func:`unstuff` removes the
``0xFF00`` escape once per scan, so random-access segments and the
sequential scan share one cursor type. Peeking past the end of the data sees
1-bits (the JPEG fill convention); consuming past the end raises
:class:`~ratex.exceptions.MalformedStreamError`.
"""

from __future__ import annotations

from ratex.exceptions import MalformedStreamError

_SENTINEL = b"\xff" * 8


def unstuff(scan_data: bytes) -> bytes:
    """Remove ``0xFF00`` byte stuffing from an entropy-coded segment."""
    return scan_data.replace(b"\xff\x00", b"\xff")


def extract_bits(data: bytes, start: int, end: int) -> int:
    """Return bits ``[start, end)`` of *data* (MSB first) as an integer."""
    if end <= start:
        return 0
    first = start >> 3
    last = (end + 7) >> 3
    chunk = int.from_bytes(data[first:last], "big")
    chunk >>= last * 8 - end
    return chunk & ((1 << (end - start)) - 1)


class BitCursor:
    """MSB-first bit reader with a 16-bit prefetch window.

    Parameters
    ----------
    data:
        Unstuffed entropy-coded bytes.
    position:
        Starting bit index.
    """

    __slots__ = ("_data", "limit", "position")

    def __init__(self, data: bytes, position: int = 0) -> None:
        self._data = bytes(data) + _SENTINEL
        self.limit = len(data) * 8
        self.position = position

    @property
    def window(self) -> int:
        """The next 16 bits, without consuming them."""
        pos = self.position
        byte = pos >> 3
        chunk = int.from_bytes(self._data[byte : byte + 3], "big")
        return (chunk >> (8 - (pos & 7))) & 0xFFFF

    @property
    def exhausted(self) -> bool:
        return self.position >= self.limit

    def skip(self, nbits: int) -> None:
        self.position += nbits
        if self.position > self.limit:
            raise MalformedStreamError(
                f"bit cursor ran {self.position - self.limit} bits past the data"
            )

    def read(self, nbits: int) -> int:
        """Consume and return *nbits* (0..25) bits."""
        if nbits == 0:
            return 0
        pos = self.position
        byte = pos >> 3
        chunk = int.from_bytes(self._data[byte : byte + 4], "big")
        value = (chunk >> (32 - (pos & 7) - nbits)) & ((1 << nbits) - 1)
        self.skip(nbits)
        return value

    def receive_extend(self, size: int) -> int:
        """Read a *size*-bit magnitude and sign-extend it (T.81 EXTEND)."""
        if size == 0:
            return 0
        value = self.read(size)
        if value < 1 << (size - 1):
            value -= (1 << size) - 1
        return value


class BitWriter:
    """MSB-first bit writer.

    Parameters
    ----------
    stuff:
        Insert ``0x00`` after every emitted ``0xFF`` (JPEG scan data).
    """

    __slots__ = ("_acc", "_nbits", "_out", "_stuff", "bits_written")

    def __init__(self, *, stuff: bool = False) -> None:
        self._out = bytearray()
        self._acc = 0
        self._nbits = 0
        self._stuff = stuff
        self.bits_written = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits <= 0:
            return
        self._acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        self._nbits += nbits
        self.bits_written += nbits
        if self._nbits >= 8:
            full, rem = divmod(self._nbits, 8)
            chunk = (self._acc >> rem).to_bytes(full, "big")
            self._acc &= (1 << rem) - 1
            self._nbits = rem
            if self._stuff:
                chunk = chunk.replace(b"\xff", b"\xff\x00")
            self._out += chunk

    def write_signed(self, value: int, nbits: int) -> None:
        """Write *value* as *nbits*-bit two's complement."""
        self.write(value & ((1 << nbits) - 1), nbits)

    def pad_to_byte(self) -> int:
        """Fill with 1-bits to the next byte boundary; return the count."""
        fill = -self._nbits % 8
        self.write((1 << fill) - 1, fill)
        return fill

    def getvalue(self) -> bytes:
        """Bytes written so far; a partial trailing byte is not included."""
        return bytes(self._out)
