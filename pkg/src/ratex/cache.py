"""Texture block cache: packed keys -> pooled 16x16 RGB blocks.

An open-addressed table (linear probing, ``2 x capacity`` slots rounded
up to a power of two, multiplicative hashing) maps each key to an entry
that is *Reserved* (marked, not yet decoded) or *Ready* (block
published). Pool blocks are claimed at reservation and handed out at
publication, so ``resident + free == capacity`` holds at every pass
boundary.

Per frame: the mark pass reserves or re-marks keys, the decode pass
publishes blocks, the resolve pass looks them up, and
:meth:`BlockCache.end_frame_evict` frees every Ready block that was not
marked this frame.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ratex.exceptions import CacheFullError, InvalidCacheStateError
from ratex.types import MCU_SIZE, PixelBlock, ReserveResult

logger = logging.getLogger(__name__)

_HASH_MULTIPLIER = 2654435761
_EMPTY = -1


class EntryState(enum.IntEnum):
    EMPTY = 0
    RESERVED = 1
    READY = 2


@dataclass(frozen=True, slots=True)
class CacheStats:
    """Cumulative counters of one :class:`BlockCache`.

    ``hits`` counts mark-pass requests for keys that were already resident;
    ``reservations`` counts the ones that had to be decoded.
    """

    capacity: int
    resident: int
    free: int
    reservations: int
    hits: int
    evictions: int

    @property
    def hit_rate(self) -> float:
        requests = self.hits + self.reservations
        return self.hits / requests if requests else 0.0


class BlockCache:
    """Hash map from 32-bit cache keys to pooled pixel blocks.

    Parameters
    ----------
    capacity:
        Number of pool blocks; must exceed the per-frame working set.

    Notes
    -----
    :meth:`reserve_or_mark` and :meth:`publish` serialize on an internal
    lock, standing in for the compare-and-swap on a slot's key. Lookups
    are lock-free. :meth:`end_frame_evict` and :meth:`clear` need
    exclusive access (no other pass running).
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        slots = 1 << max(1, (2 * capacity - 1).bit_length())
        self._slot_bits = slots.bit_length() - 1
        self._mask = slots - 1
        self._keys = np.full(slots, _EMPTY, dtype=np.int64)
        self._states = np.zeros(slots, dtype=np.int8)
        self._visible = np.zeros(slots, dtype=np.bool_)
        self._handles = np.full(slots, _EMPTY, dtype=np.int64)
        self.pool = np.zeros((capacity, MCU_SIZE, MCU_SIZE, 3), dtype=np.uint8)
        self._free: list[int] = list(range(capacity - 1, -1, -1))
        self._reserved = 0
        self._lock = threading.Lock()
        self._reservations = 0
        self._hits = 0
        self._evictions = 0

    # -- hashing -------------------------------------------------------------

    @property
    def slot_count(self) -> int:
        return self._mask + 1

    def _home(self, key: int) -> int:
        return ((key * _HASH_MULTIPLIER) & 0xFFFFFFFF) >> (32 - self._slot_bits)

    def _probe(self, key: int) -> int:
        """Slot holding *key*, or the empty slot where it would go."""
        keys = self._keys
        slot = self._home(key)
        while True:
            found = keys[slot]
            if found == key or found == _EMPTY:
                return slot
            slot = (slot + 1) & self._mask

    # -- mark / decode / resolve ---------------------------------------------

    def reserve_or_mark(self, key: int) -> ReserveResult:
        """Reserve *key* for decoding, or mark it visible if already present.

        Exactly one caller per key and frame receives ``NEWLY_RESERVED``.

        Raises
        ------
        CacheFullError
            If every pool block is resident or claimed.
        """
        with self._lock:
            slot = self._probe(key)
            if self._keys[slot] == key:
                self._visible[slot] = True
                self._hits += 1
                return ReserveResult.ALREADY_PRESENT
            if len(self._free) - self._reserved <= 0:
                logger.error(
                    "block cache full (%d blocks); cannot reserve key %#010x",
                    self.capacity,
                    key,
                )
                raise CacheFullError(
                    f"all {self.capacity} cache blocks are in use; raise "
                    "cache_capacity above the number of MCUs visible per frame"
                )
            self._keys[slot] = key
            self._states[slot] = EntryState.RESERVED
            self._visible[slot] = True
            self._reserved += 1
            self._reservations += 1
            return ReserveResult.NEWLY_RESERVED

    def publish(self, key: int, block: PixelBlock) -> int:
        """Store the decoded *block* for a Reserved *key*; return its handle.

        Raises
        ------
        InvalidCacheStateError
            If *key* is absent or already Ready.
        """
        pixels = np.asarray(block, dtype=np.uint8)
        if pixels.shape != (MCU_SIZE, MCU_SIZE, 3):
            raise ValueError(f"expected a 16x16x3 block, got shape {pixels.shape}")
        with self._lock:
            slot = self._probe(key)
            if self._keys[slot] != key or self._states[slot] != EntryState.RESERVED:
                raise InvalidCacheStateError(
                    f"publish of key {key:#010x} which is not Reserved"
                )
            handle = self._free.pop()
            self.pool[handle] = pixels
            self._handles[slot] = handle
            self._states[slot] = EntryState.READY
            self._reserved -= 1
            return handle

    def lookup(self, key: int) -> int | None:
        """Pool handle of a Ready *key*; ``None`` for Reserved or absent keys."""
        slot = self._probe(key)
        if self._keys[slot] == key and self._states[slot] == EntryState.READY:
            return int(self._handles[slot])
        return None

    def lookup_many(self, keys: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
        """Vectorized :meth:`lookup`; misses are ``-1``."""
        keys = np.asarray(keys, dtype=np.int64)
        hashed = (keys.astype(np.uint64) * np.uint64(_HASH_MULTIPLIER)) & np.uint64(
            0xFFFFFFFF
        )
        slots = (hashed >> np.uint64(32 - self._slot_bits)).astype(np.int64)
        result = np.full(keys.shape, _EMPTY, dtype=np.int64)
        pending = np.arange(keys.size)
        flat_keys = keys.reshape(-1)
        flat_slots = slots.reshape(-1)
        flat_result = result.reshape(-1)
        while pending.size:
            found = self._keys[flat_slots[pending]]
            hit = found == flat_keys[pending]
            done = hit | (found == _EMPTY)
            hit_idx = pending[hit]
            hit_slots = flat_slots[hit_idx]
            ready = self._states[hit_slots] == EntryState.READY
            flat_result[hit_idx[ready]] = self._handles[hit_slots[ready]]
            pending = pending[~done]
            flat_slots[pending] = (flat_slots[pending] + 1) & self._mask
        return result

    def block(self, handle: int) -> PixelBlock:
        return self.pool[handle]

    # -- update --------------------------------------------------------------

    def end_frame_evict(self) -> int:
        """Free every Ready block not marked this frame; reset all marks.

        Returns
        -------
        int
            Number of evicted blocks.

        Raises
        ------
        InvalidCacheStateError
            If Reserved entries remain (a decode pass did not complete).
        """
        return self._evict(keep_visible=True)

    def clear(self) -> int:
        """Evict every Ready block regardless of visibility."""
        return self._evict(keep_visible=False)

    def cancel_reservations(self) -> int:
        """Drop Reserved entries after a failed pass; return how many."""
        with self._lock:
            reserved = self._states == EntryState.RESERVED
            count = int(reserved.sum())
            if count:
                self._keys[reserved] = _EMPTY
                self._states[reserved] = EntryState.EMPTY
                self._visible[reserved] = False
                self._reserved = 0
                self._rebuild()
            return count

    def _evict(self, *, keep_visible: bool) -> int:
        with self._lock:
            if self._reserved:
                logger.error(
                    "%d cache entries still Reserved at frame end", self._reserved
                )
                raise InvalidCacheStateError(
                    f"{self._reserved} entries are still Reserved at frame end; "
                    "every marked key must be published before the update pass"
                )
            ready = self._states == EntryState.READY
            evict = ready & ~self._visible if keep_visible else ready
            count = int(evict.sum())
            if count:
                self._free.extend(self._handles[evict].tolist())
                self._keys[evict] = _EMPTY
                self._states[evict] = EntryState.EMPTY
                self._handles[evict] = _EMPTY
                self._evictions += count
                self._rebuild()
            self._visible[:] = False
            return count

    def _rebuild(self) -> None:
        """Re-insert survivors so probe chains have no holes."""
        occupied = np.flatnonzero(self._keys != _EMPTY)
        entries = list(
            zip(
                self._keys[occupied].tolist(),
                self._states[occupied].tolist(),
                self._visible[occupied].tolist(),
                self._handles[occupied].tolist(),
                strict=True,
            )
        )
        self._keys[:] = _EMPTY
        self._states[:] = EntryState.EMPTY
        self._visible[:] = False
        self._handles[:] = _EMPTY
        for key, state, visible, handle in entries:
            slot = self._probe(key)
            self._keys[slot] = key
            self._states[slot] = state
            self._visible[slot] = visible
            self._handles[slot] = handle

    # -- introspection -------------------------------------------------------

    @property
    def free_count(self) -> int:
        """Pool blocks neither resident nor claimed by a reservation."""
        return len(self._free) - self._reserved

    def __len__(self) -> int:
        return int(np.count_nonzero(self._keys != _EMPTY))

    def __contains__(self, key: object) -> bool:
        if not isinstance(key, int | np.integer):
            return False
        return bool(self._keys[self._probe(int(key))] == key)

    def state(self, key: int) -> EntryState:
        slot = self._probe(key)
        if self._keys[slot] != key:
            return EntryState.EMPTY
        return EntryState(int(self._states[slot]))

    def is_visible(self, key: int) -> bool:
        slot = self._probe(key)
        return bool(self._keys[slot] == key and self._visible[slot])

    def resident_keys(self) -> frozenset[int]:
        """Keys of Ready entries."""
        ready = self._states == EntryState.READY
        return frozenset(self._keys[ready].tolist())

    def stats(self) -> CacheStats:
        return CacheStats(
            capacity=self.capacity,
            resident=int(np.count_nonzero(self._states == EntryState.READY)),
            free=self.free_count,
            reservations=self._reservations,
            hits=self._hits,
            evictions=self._evictions,
        )
