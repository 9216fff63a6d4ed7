"""Shared fixtures and independent oracles for the ratex tests."""

from __future__ import annotations

import io
import math
import os

import numpy as np
import pytest
from PIL import Image

from ratex import (
    BlockCache,
    Camera,
    Mesh,
    MipChain,
    RatexConfig,
    Scene,
    build_demo_scene,
    build_mip_chain,
    parse_jpeg,
    transcode,
)
from ratex.pixels import round_half_away
from ratex.scene import quad_mesh
from ratex.types import HuffmanSpec

# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def smooth_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Low-frequency RGB waves plus mild noise, deterministic per seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    channels = []
    for c in range(3):
        fx, fy = rng.uniform(0.5, 2.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        angle = 2 * np.pi * (fx * xx / width + fy * yy / height) + phase
        channels.append(128 + 60 * np.sin(angle) + 20 * c)
    image = np.stack(channels, axis=-1) + rng.normal(0, 3, size=(height, width, 3))
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def gentle_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Half a cycle of low-contrast shading: small DC steps between MCUs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    channels = [
        128 + 20 * np.sin(np.pi * (xx / width + yy / height) + phase)
        for phase in phases
    ]
    image = np.stack(channels, axis=-1) + rng.normal(0, 2, size=(height, width, 3))
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def noisy_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Full-range noise: long AC runs and large DC differences."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def pillow_jpeg(image: np.ndarray, quality: int) -> bytes:
    """Baseline 4:2:0 JPEG written by Pillow's libjpeg, standard tables."""
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, "JPEG", quality=quality, subsampling=2)
    return buf.getvalue()


def jpeg_with_scan(data: bytes, scan: bytes) -> bytes:
    """Swap the entropy-coded segment of an ``encode_baseline`` stream."""
    sos = data.index(b"\xff\xda")
    header_end = sos + 2 + int.from_bytes(data[sos + 2 : sos + 4], "big")
    return data[:header_end] + scan + b"\xff\xd9"


# (height, width, quality, kind): spans odd sizes, single-MCU images and
# MCU counts that are and are not multiples of nine.
CORPUS = [
    (16, 16, 50, "smooth"),
    (17, 33, 70, "noisy"),
    (40, 48, 80, "smooth"),
    (75, 100, 90, "smooth"),
    (64, 64, 50, "noisy"),
    (128, 128, 80, "smooth"),
    (144, 144, 70, "smooth"),
    (31, 200, 90, "noisy"),
    (96, 80, 80, "noisy"),
    (48, 144, 50, "smooth"),
    (120, 24, 70, "smooth"),
    (160, 96, 90, "noisy"),
]


def corpus_image(height: int, width: int, kind: str, seed: int) -> np.ndarray:
    if kind == "noisy":
        return noisy_image(height, width, seed)
    return smooth_image(height, width, seed)


@pytest.fixture(
    params=range(len(CORPUS)),
    ids=[f"{w}x{h}-q{q}-{k}" for h, w, q, k in CORPUS],
)
def corpus_jpeg(request) -> bytes:
    height, width, quality, kind = CORPUS[request.param]
    return pillow_jpeg(corpus_image(height, width, kind, request.param), quality)


@pytest.fixture()
def small_jpeg() -> bytes:
    return pillow_jpeg(smooth_image(40, 48, seed=7), 80)


@pytest.fixture()
def small_texture(small_jpeg):
    return transcode(parse_jpeg(small_jpeg), texture_id=5)


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


def facing_quad_scene(chain: MipChain, half: float = 0.5) -> tuple[Scene, Camera]:
    """One quad at ``z = -1`` seen head-on from the origin.

    With the 64x64, 90 degree camera the quad covers pixels 16..47 in both
    directions, so a 32-texel texture maps one texel per pixel.
    """
    corners = [
        (-half, -half, -1.0),
        (half, -half, -1.0),
        (half, half, -1.0),
        (-half, half, -1.0),
    ]
    mesh = quad_mesh(corners, (1.0, 1.0), chain.texture_id, "quad")
    scene = Scene(meshes=(mesh,), textures={chain.texture_id: chain})
    camera = Camera(fov_y=90.0, near=0.1, far=10.0, width=64, height=64)
    return scene, camera


@pytest.fixture(scope="session")
def chain32() -> MipChain:
    return build_mip_chain(smooth_image(32, 32, seed=3), 90, texture_id=1)


@pytest.fixture(scope="session")
def chain128() -> MipChain:
    return build_mip_chain(smooth_image(128, 128, seed=4), 80, texture_id=2)


@pytest.fixture(scope="session")
def demo_scene() -> tuple[Scene, Camera]:
    return build_demo_scene(texture_size=128, quality=75, viewport=(160, 90))


@pytest.fixture()
def cache() -> BlockCache:
    return BlockCache(4096)


@pytest.fixture()
def render_config() -> RatexConfig:
    return RatexConfig(cache_capacity=4096, workers=2, filter="nearest")


@pytest.fixture()
def isolated_env(monkeypatch, tmp_path):
    """No ``RATEX_*`` variables and no ``ratex.toml`` reachable from cwd."""
    for key in list(os.environ):
        if key.startswith("RATEX_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("RATEX_CONFIG_PATH", str(tmp_path / "absent.toml"))
    monkeypatch.chdir(tmp_path)
    return tmp_path


def triangle_mesh(texture_id: int = 0) -> Mesh:
    positions = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    uvs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(positions, uvs, np.array([[0, 1, 2]]), texture_id, "tri")


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def bitstring_codes(spec: HuffmanSpec) -> dict[str, int]:
    """Canonical codes built as strings, one length at a time."""
    table: dict[str, int] = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(spec.counts[length - 1]):
            table[format(code, f"0{length}b")] = spec.symbols[k]
            code += 1
            k += 1
        code <<= 1
    return table


def random_huffman_spec(
    rng: np.random.Generator, complete: bool = True
) -> HuffmanSpec:
    """A valid spec grown by splitting leaves of a binary code tree.

    Complete specs fill the code space, so their last code is all ones.
    Incomplete specs drop at least one leaf, leaving the top of the code
    space (the all-ones window included) without a code.
    """
    target = int(rng.integers(2, 257))
    lengths = [1, 1]
    while len(lengths) < target:
        splittable = [i for i, n in enumerate(lengths) if n < 16]
        if rng.random() < 0.5:
            i = max(splittable, key=lengths.__getitem__)
        else:
            i = splittable[int(rng.integers(len(splittable)))]
        lengths[i] += 1
        lengths.append(lengths[i])
    if not complete:
        keep = int(rng.integers(1, len(lengths)))
        lengths = [int(n) for n in rng.permutation(lengths)[:keep]]
    counts = [0] * 16
    for n in lengths:
        counts[n - 1] += 1
    symbols = rng.permutation(256)[: len(lengths)]
    return HuffmanSpec(counts=tuple(counts), symbols=tuple(int(s) for s in symbols))


def bitstring_decode(bits: str, spec: HuffmanSpec, count: int) -> list[int]:
    """Decode *count* symbols by growing a prefix until it names a code."""
    table = bitstring_codes(spec)
    out: list[int] = []
    prefix = ""
    for bit in bits:
        prefix += bit
        if prefix in table:
            out.append(table[prefix])
            prefix = ""
            if len(out) == count:
                break
    return out


def direct_idct(coeffs: np.ndarray, quant: np.ndarray) -> np.ndarray:
    """Textbook 8x8 inverse DCT of natural-order coefficients, before rounding."""
    spectrum = (np.asarray(coeffs, np.float64) * np.asarray(quant)).reshape(8, 8)
    out = np.zeros((8, 8))
    for y in range(8):
        for x in range(8):
            total = 0.0
            for v in range(8):
                for u in range(8):
                    cu = 1 / math.sqrt(2) if u == 0 else 1.0
                    cv = 1 / math.sqrt(2) if v == 0 else 1.0
                    total += (
                        cu * cv * spectrum[v, u]
                        * math.cos((2 * x + 1) * u * math.pi / 16)
                        * math.cos((2 * y + 1) * v * math.pi / 16)
                    )
            out[y, x] = total / 4 + 128
    return out


def two_step_max_of_medians(matrix: list[list[float]]) -> float:
    medians = []
    for row in matrix:
        ordered = sorted(row)
        n = len(ordered)
        mid = n // 2
        medians.append(
            ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
        )
    return max(medians)


def sample_nearest(texture: np.ndarray, u: float, v: float) -> np.ndarray:
    """Nearest texel of a fully decoded texture with wrapping."""
    h, w = texture.shape[:2]
    return texture[math.floor(v * h) % h, math.floor(u * w) % w]


def sample_bilinear(texture: np.ndarray, u: float, v: float) -> np.ndarray:
    """Four-tap bilinear sample of a fully decoded texture with wrapping."""
    h, w = texture.shape[:2]
    tx, ty = u * w - 0.5, v * h - 0.5
    x0, y0 = math.floor(tx), math.floor(ty)
    fx, fy = tx - x0, ty - y0
    c00 = texture[y0 % h, x0 % w].astype(np.float64)
    c10 = texture[y0 % h, (x0 + 1) % w].astype(np.float64)
    c01 = texture[(y0 + 1) % h, x0 % w].astype(np.float64)
    c11 = texture[(y0 + 1) % h, (x0 + 1) % w].astype(np.float64)
    value = (
        (1.0 - fx) * (1.0 - fy) * c00
        + fx * (1.0 - fy) * c10
        + (1.0 - fx) * fy * c01
        + fx * fy * c11
    )
    return np.clip(round_half_away(value), 0, 255).astype(np.uint8)


def brute_force_keys(gbuffer, textures) -> set[int]:
    """Distinct ``(mip, texture, mcu)`` keys by a per-pixel Python loop."""
    keys: set[int] = set()
    height, width = gbuffer.valid.shape
    for y in range(height):
        for x in range(width):
            if not gbuffer.valid[y, x]:
                continue
            tid = int(gbuffer.texture_id[y, x])
            chain = textures[tid]
            mip = min(int(gbuffer.mip_level[y, x]), chain.level_count - 1)
            level = chain.levels[mip]
            tx = math.floor(gbuffer.u[y, x] * level.width) % level.width
            ty = math.floor(gbuffer.v[y, x] * level.height) % level.height
            mcu = tx // 16 + (ty // 16) * level.mcu_cols
            keys.add((mip << 29) | (tid << 16) | mcu)
    return keys
