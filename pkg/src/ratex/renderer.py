"""Deferred texture-decoding renderer.

One frame runs five passes separated by barriers:

1. **raster**: scene to :class:`~ratex.raster.GBuffer`
2. **mark**: reserve the MCU under every covered pixel
3. **decode**: decode newly reserved MCUs in parallel, publish blocks
4. **resolve**: sample texels from the cache into an RGB image
5. **update**: evict blocks not marked this frame

Only MCUs that some pixel actually samples are ever decoded; blocks
marked in consecutive frames are decoded once.
"""

from __future__ import annotations

import logging
import threading
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from ratex.cache import BlockCache
from ratex.config import RatexConfig
from ratex.decoders import SymbolDecoder, get_symbol_decoder
from ratex.exceptions import (
    CodestreamError,
    McuDecodeError,
    MissingBlockError,
    RatexError,
)
from ratex.mcu import decode_mcu
from ratex.pixels import round_half_away
from ratex.raster import GBuffer, rasterize_gbuffer
from ratex.scene import Camera, Scene
from ratex.types import (
    MCU_SIZE,
    FilterMode,
    FrameStats,
    MipChain,
    ReserveResult,
    RGBImage,
    StereoStats,
    unpack_key,
)

logger = logging.getLogger(__name__)

_MIP_SHIFT = 29
_TEXTURE_SHIFT = 16

# ---------------------------------------------------------------------------
# Texel addressing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class Samples:
    """Covered pixels of a G-buffer with the level each one samples.

    All arrays are 1-D over the covered pixels in row-major order.
    ``mip_level`` is already clamped to the chain length.
    """

    pixels: npt.NDArray[np.int64]
    u: npt.NDArray[np.float64]
    v: npt.NDArray[np.float64]
    texture_id: npt.NDArray[np.int64]
    mip_level: npt.NDArray[np.int64]
    width: npt.NDArray[np.int64]
    height: npt.NDArray[np.int64]
    mcu_cols: npt.NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.pixels.size)


def gather_samples(gbuffer: GBuffer, textures: Mapping[int, MipChain]) -> Samples:
    valid = gbuffer.valid.reshape(-1)
    pixels = np.flatnonzero(valid)
    texture_id = gbuffer.texture_id.reshape(-1)[pixels].astype(np.int64)
    mip = gbuffer.mip_level.reshape(-1)[pixels].astype(np.int64)
    width = np.zeros_like(texture_id)
    height = np.zeros_like(texture_id)
    cols = np.zeros_like(texture_id)
    for tid in np.unique(texture_id).tolist():
        chain = textures[tid]
        group = texture_id == tid
        mip[group] = np.minimum(mip[group], chain.level_count - 1)
        levels = mip[group]
        width[group] = np.array([lv.width for lv in chain.levels])[levels]
        height[group] = np.array([lv.height for lv in chain.levels])[levels]
        cols[group] = np.array([lv.mcu_cols for lv in chain.levels])[levels]
    return Samples(
        pixels=pixels,
        u=gbuffer.u.reshape(-1)[pixels],
        v=gbuffer.v.reshape(-1)[pixels],
        texture_id=texture_id,
        mip_level=mip,
        width=width,
        height=height,
        mcu_cols=cols,
    )


def texel_keys(
    samples: Samples, x: npt.NDArray[np.int64], y: npt.NDArray[np.int64]
) -> npt.NDArray[np.int64]:
    """Packed cache keys of the MCUs holding texels ``(x, y)`` (wrapped).

    Rows are ``ceil(width / 16)`` MCUs long, so a partial MCU at the right
    edge gets its own id; for widths divisible by 16 this equals the floor.
    """
    mcu = x // MCU_SIZE + (y // MCU_SIZE) * samples.mcu_cols
    return (
        (samples.mip_level << _MIP_SHIFT)
        | (samples.texture_id << _TEXTURE_SHIFT)
        | mcu
    )


def nearest_texels(
    samples: Samples,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Wrapped texel coordinates ``(floor(u*w) mod w, floor(v*h) mod h)``."""
    x = np.floor(samples.u * samples.width).astype(np.int64) % samples.width
    y = np.floor(samples.v * samples.height).astype(np.int64) % samples.height
    return x, y


def pixel_mcu_keys(
    gbuffer: GBuffer, textures: Mapping[int, MipChain]
) -> npt.NDArray[np.int64]:
    """Cache key of the MCU sampled by each covered pixel.

    MCU ids follow the padded grid of :func:`texel_keys`.
    """
    samples = gather_samples(gbuffer, textures)
    return texel_keys(samples, *nearest_texels(samples))


# ---------------------------------------------------------------------------
# Mark
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class DecodeQueue:
    """Result of a mark pass.

    ``keys`` are the newly reserved keys in ascending order; ``visible`` is
    every key marked this frame, sorted and unique.
    """

    keys: tuple[int, ...]
    visible: npt.NDArray[np.int64]

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def visible_keys(self) -> frozenset[int]:
        return frozenset(self.visible.tolist())


def mark_pass(
    gbuffers: GBuffer | Sequence[GBuffer],
    cache: BlockCache,
    textures: Mapping[int, MipChain],
) -> DecodeQueue:
    """Reserve or re-mark the MCU of every covered pixel.

    Several G-buffers (the eyes of a stereo frame) are marked as one
    working set.

    Raises
    ------
    CacheFullError
        Propagated from :meth:`BlockCache.reserve_or_mark`.
    """
    if isinstance(gbuffers, GBuffer):
        gbuffers = [gbuffers]
    keys = [pixel_mcu_keys(gb, textures) for gb in gbuffers]
    visible = np.unique(np.concatenate(keys)) if keys else np.empty(0, np.int64)
    queued = [
        key
        for key in visible.tolist()
        if cache.reserve_or_mark(key) is ReserveResult.NEWLY_RESERVED
    ]
    return DecodeQueue(keys=tuple(queued), visible=visible.astype(np.int64))


# ---------------------------------------------------------------------------
# Decode
# ---------------------------------------------------------------------------


def decode_pass(
    queue: DecodeQueue,
    textures: Mapping[int, MipChain],
    cache: BlockCache,
    *,
    workers: int | None = None,
    symbol_decoder: str = "table",
) -> int:
    """Decode every queued MCU and publish it; one work item per MCU.

    Each worker thread owns its own symbol decoder. Returns the number of
    MCUs decoded.

    Raises
    ------
    McuDecodeError
        The first failing key in queue order; every still-Reserved entry
        is cancelled before raising.
    """
    if not queue.keys:
        return 0
    local = threading.local()

    def decode_one(key: int) -> None:
        symbols: SymbolDecoder | None = getattr(local, "symbols", None)
        if symbols is None:
            symbols = local.symbols = get_symbol_decoder(symbol_decoder)
        mcu_id, texture_id, mip_level = unpack_key(key)
        try:
            block = decode_mcu(textures[texture_id].levels[mip_level], mcu_id, symbols)
        except (CodestreamError, IndexError, KeyError) as exc:
            raise McuDecodeError(
                f"decoding MCU {mcu_id} of texture {texture_id} mip {mip_level} "
                f"failed: {exc}",
                key,
            ) from exc
        cache.publish(key, block)

    failure: Exception | None = None
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures: list[Future[None]] = [
            executor.submit(decode_one, key) for key in queue.keys
        ]
        for future in futures:
            try:
                future.result()
            except Exception as exc:
                failure = exc
                for pending in futures:
                    pending.cancel()
                break
    if failure is not None:
        cancelled = cache.cancel_reservations()
        logger.error(
            "decode pass failed (%d reservations cancelled): %s", cancelled, failure
        )
        raise failure
    return len(queue.keys)


# ---------------------------------------------------------------------------
# Resolve
# ---------------------------------------------------------------------------


def _lookup_primary(
    cache: BlockCache, keys: npt.NDArray[np.int64]
) -> npt.NDArray[np.int64]:
    handles = cache.lookup_many(keys)
    missing = handles < 0
    if missing.any():
        key = int(keys[np.argmax(missing)])
        logger.error(
            "resolve: %d pixels sample non-resident MCUs (first key %#010x)",
            int(missing.sum()),
            key,
        )
        raise MissingBlockError(
            f"MCU key {key:#010x} was not decoded before resolve; "
            "mark and decode must cover every covered pixel"
        )
    return handles


def _fetch(
    cache: BlockCache,
    handles: npt.NDArray[np.int64],
    x: npt.NDArray[np.int64],
    y: npt.NDArray[np.int64],
) -> npt.NDArray[np.float64]:
    return cache.pool[handles, y % MCU_SIZE, x % MCU_SIZE].astype(np.float64)


def bilinear_blend(
    c00: npt.NDArray[np.float64],
    c10: npt.NDArray[np.float64],
    c01: npt.NDArray[np.float64],
    c11: npt.NDArray[np.float64],
    fx: npt.NDArray[np.float64],
    fy: npt.NDArray[np.float64],
) -> npt.NDArray[np.uint8]:
    """Weighted sum of four ``(n, 3)`` taps, rounded half away from zero."""
    gx, gy = fx[:, None], fy[:, None]
    value = (
        (1.0 - gx) * (1.0 - gy) * c00
        + gx * (1.0 - gy) * c10
        + (1.0 - gx) * gy * c01
        + gx * gy * c11
    )
    return np.clip(round_half_away(value), 0, 255).astype(np.uint8)


def _resolve_bilinear(
    samples: Samples,
    cache: BlockCache,
    xn: npt.NDArray[np.int64],
    yn: npt.NDArray[np.int64],
    primary: npt.NDArray[np.int64],
    *,
    clamped: bool,
    marked: npt.NDArray[np.int64] | None,
) -> npt.NDArray[np.uint8]:
    tx = samples.u * samples.width - 0.5
    ty = samples.v * samples.height - 0.5
    x0 = np.floor(tx)
    y0 = np.floor(ty)
    fx = tx - x0
    fy = ty - y0
    # Offsets of the lower taps from the nearest texel: -1 or 0.
    dx = x0.astype(np.int64) - np.floor(samples.u * samples.width).astype(np.int64)
    dy = y0.astype(np.int64) - np.floor(samples.v * samples.height).astype(np.int64)

    if clamped:
        lo_x = (xn // MCU_SIZE) * MCU_SIZE
        lo_y = (yn // MCU_SIZE) * MCU_SIZE
        hi_x = np.minimum(lo_x + MCU_SIZE - 1, samples.width - 1)
        hi_y = np.minimum(lo_y + MCU_SIZE - 1, samples.height - 1)
        xs = (np.clip(xn + dx, lo_x, hi_x), np.clip(xn + dx + 1, lo_x, hi_x))
        ys = (np.clip(yn + dy, lo_y, hi_y), np.clip(yn + dy + 1, lo_y, hi_y))
    else:
        xs = ((xn + dx) % samples.width, (xn + dx + 1) % samples.width)
        ys = ((yn + dy) % samples.height, (yn + dy + 1) % samples.height)

    taps = []
    for ty_ in ys:
        for tx_ in xs:
            if clamped:
                taps.append(_fetch(cache, primary, tx_, ty_))
                continue
            keys = texel_keys(samples, tx_, ty_)
            handles = cache.lookup_many(keys)
            usable = handles >= 0
            if marked is not None:
                usable &= np.isin(keys, marked)
            # Fall back to the primary MCU's bordering texel on each axis
            # where the tap left it.
            sx = np.where(tx_ // MCU_SIZE == xn // MCU_SIZE, tx_, xn)
            sy = np.where(ty_ // MCU_SIZE == yn // MCU_SIZE, ty_, yn)
            x = np.where(usable, tx_, sx)
            y = np.where(usable, ty_, sy)
            taps.append(_fetch(cache, np.where(usable, handles, primary), x, y))
    c00, c10, c01, c11 = taps
    return bilinear_blend(c00, c10, c01, c11, fx, fy)


def resolve_pass(
    gbuffer: GBuffer,
    cache: BlockCache,
    textures: Mapping[int, MipChain],
    filter: FilterMode = FilterMode.BILINEAR,
    background: tuple[int, int, int] = (0, 0, 0),
    *,
    marked: npt.NDArray[np.int64] | None = None,
) -> RGBImage:
    """Sample decoded texels into an ``(H, W, 3)`` image.

    Parameters
    ----------
    filter:
        ``NEAREST`` takes the texel under ``(u, v)``. ``BILINEAR`` blends
        the four texels around it; a tap whose MCU is not available is
        replaced by the bordering texel of the pixel's own MCU.
        ``BILINEAR_CLAMPED`` always clamps the taps into the pixel's own
        MCU.
    marked:
        Sorted keys marked this frame. When given, bilinear taps only use
        those MCUs, so the image does not depend on blocks left over from
        earlier frames.

    Raises
    ------
    MissingBlockError
        A pixel's own MCU is not resident.
    """
    image = np.empty((gbuffer.height, gbuffer.width, 3), dtype=np.uint8)
    image[...] = np.asarray(background, dtype=np.uint8)
    samples = gather_samples(gbuffer, textures)
    if not len(samples):
        return image

    xn, yn = nearest_texels(samples)
    primary = _lookup_primary(cache, texel_keys(samples, xn, yn))
    if filter is FilterMode.NEAREST:
        colors = cache.pool[primary, yn % MCU_SIZE, xn % MCU_SIZE]
    else:
        colors = _resolve_bilinear(
            samples,
            cache,
            xn,
            yn,
            primary,
            clamped=filter is FilterMode.BILINEAR_CLAMPED,
            marked=marked,
        )
    image.reshape(-1, 3)[samples.pixels] = colors
    return image


# ---------------------------------------------------------------------------
# Frame driver
# ---------------------------------------------------------------------------


class DeferredRenderer:
    """Runs the five passes against one persistent :class:`BlockCache`.

    Parameters
    ----------
    config:
        Filter, mip, cache and worker settings. Defaults to
        ``RatexConfig()`` (environment not consulted).
    cache:
        Shared block cache; a new one of ``config.cache_capacity`` blocks
        is created when omitted.
    """

    def __init__(
        self, config: RatexConfig | None = None, cache: BlockCache | None = None
    ) -> None:
        self.config = (config or RatexConfig()).validate()
        self.cache = cache if cache is not None else BlockCache(
            self.config.cache_capacity
        )
        self.frames_rendered = 0

    def _raster(self, scene: Scene, camera: Camera) -> GBuffer:
        return rasterize_gbuffer(
            scene, camera, enable_mipmaps=self.config.enable_mipmaps
        )

    def _run_passes(
        self, scene: Scene, gbuffers: Sequence[GBuffer], timings: dict[str, float]
    ) -> tuple[list[RGBImage], DecodeQueue]:
        cfg = self.config
        try:
            start = time.perf_counter()
            queue = mark_pass(gbuffers, self.cache, scene.textures)
            timings["mark"] = time.perf_counter() - start

            start = time.perf_counter()
            decode_pass(
                queue,
                scene.textures,
                self.cache,
                workers=cfg.workers,
                symbol_decoder=cfg.symbol_decoder,
            )
            timings["decode"] = time.perf_counter() - start

            start = time.perf_counter()
            images = [
                resolve_pass(
                    gb,
                    self.cache,
                    scene.textures,
                    cfg.filter_mode,
                    cfg.background,
                    marked=queue.visible,
                )
                for gb in gbuffers
            ]
            timings["resolve"] = time.perf_counter() - start
        except RatexError:
            self.cache.cancel_reservations()
            raise

        start = time.perf_counter()
        if cfg.enable_cache:
            self.cache.end_frame_evict()
        else:
            self.cache.clear()
        timings["update"] = time.perf_counter() - start
        self.frames_rendered += 1
        return images, queue

    @staticmethod
    def _frame_stats(
        queue: DecodeQueue, pixels: int, timings: dict[str, float]
    ) -> FrameStats:
        return FrameStats(
            mcus_decoded=len(queue.keys),
            mcus_reused=len(queue.visible) - len(queue.keys),
            pixels_resolved=pixels,
            pass_seconds=dict(timings),
            decoded_keys=frozenset(queue.keys),
            visible_keys=queue.visible_keys,
        )

    def render(self, scene: Scene, camera: Camera) -> tuple[RGBImage, FrameStats]:
        """Render one frame; the cache is left in its post-evict state."""
        timings: dict[str, float] = {}
        start = time.perf_counter()
        gbuffer = self._raster(scene, camera)
        timings["raster"] = time.perf_counter() - start

        (image,), queue = self._run_passes(scene, [gbuffer], timings)
        stats = self._frame_stats(queue, gbuffer.covered, timings)
        logger.debug(
            "frame %d: %d decoded, %d reused, %d pixels, pipeline %.2f ms",
            self.frames_rendered,
            stats.mcus_decoded,
            stats.mcus_reused,
            stats.pixels_resolved,
            stats.pipeline_seconds * 1e3,
        )
        return image, stats

    def render_stereo(
        self, scene: Scene, left: Camera, right: Camera
    ) -> tuple[RGBImage, RGBImage, StereoStats]:
        """Render both eyes as one frame: a single mark and decode over both."""
        timings: dict[str, float] = {}
        start = time.perf_counter()
        gb_left = self._raster(scene, left)
        gb_right = self._raster(scene, right)
        timings["raster"] = time.perf_counter() - start

        left_keys = _key_set(gb_left, scene.textures)
        right_keys = _key_set(gb_right, scene.textures)
        (img_left, img_right), queue = self._run_passes(
            scene, [gb_left, gb_right], timings
        )
        frame = self._frame_stats(queue, gb_left.covered + gb_right.covered, timings)
        stats = StereoStats(frame=frame, left_keys=left_keys, right_keys=right_keys)
        logger.debug(
            "stereo frame %d: %d decoded, sharing %.3f of union, %.3f of right eye",
            self.frames_rendered,
            frame.mcus_decoded,
            stats.shared_over_union,
            stats.shared_over_right,
        )
        return img_left, img_right, stats


def _key_set(
    gbuffer: GBuffer, textures: Mapping[int, MipChain]
) -> frozenset[int]:
    return frozenset(np.unique(pixel_mcu_keys(gbuffer, textures)).tolist())


def _renderer_for(
    cache: BlockCache, filter: FilterMode, config: RatexConfig | None
) -> DeferredRenderer:
    cfg = config or RatexConfig(cache_capacity=cache.capacity)
    return DeferredRenderer(replace(cfg, filter=filter.value), cache)


def render_frame(
    scene: Scene,
    camera: Camera,
    cache: BlockCache,
    filter: FilterMode = FilterMode.BILINEAR,
    *,
    config: RatexConfig | None = None,
) -> tuple[RGBImage, FrameStats]:
    """Render one frame against *cache*. See :meth:`DeferredRenderer.render`."""
    return _renderer_for(cache, filter, config).render(scene, camera)


def render_stereo(
    scene: Scene,
    left: Camera,
    right: Camera,
    cache: BlockCache,
    filter: FilterMode = FilterMode.BILINEAR,
    *,
    config: RatexConfig | None = None,
) -> tuple[RGBImage, RGBImage, StereoStats]:
    """Render a stereo pair against *cache* as a single frame."""
    return _renderer_for(cache, filter, config).render_stereo(scene, left, right)
