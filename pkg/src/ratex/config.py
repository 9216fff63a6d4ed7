"""ratex configuration.

Configuration is resolved with the following precedence (highest first):

1. Explicit keyword arguments passed to constructors / ``from_env()``
2. ``RATEX_*`` environment variables (also read from ``.env``)
3. ``ratex.toml`` file (tuning parameters, version-controlled)
4. Built-in defaults
"""

from __future__ import annotations

import os
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ratex.exceptions import ConfigurationError
from ratex.types import FilterMode

SYMBOL_DECODERS = ("table", "sequential", "ballot")

# ---------------------------------------------------------------------------
# Env-var helpers
# ---------------------------------------------------------------------------


def _env_float(key: str, default: float) -> float:
    val = os.environ.get(key)
    return float(val) if val is not None else default


def _env_int(key: str, default: int) -> int:
    val = os.environ.get(key)
    return int(val) if val is not None else default


def _env_bool(key: str, default: bool) -> bool:
    val = os.environ.get(key)
    if val is None:
        return default
    return val.lower() in ("1", "true", "yes")


def _env_int_or_none(key: str, default: int | None) -> int | None:
    val = os.environ.get(key)
    if val is None:
        return default
    return int(val)


def _env_str(key: str, default: str) -> str:
    return os.environ.get(key, default)


# ---------------------------------------------------------------------------
# TOML loader
# ---------------------------------------------------------------------------

_TOML_FILENAME = "ratex.toml"


def _find_toml(start: Path | None = None) -> Path | None:
    """Locate ``ratex.toml``.

    Resolution order:

    1. ``RATEX_CONFIG_PATH`` env var
    2. Walk up from *start*, or from the cwd
    """
    env_path = os.environ.get("RATEX_CONFIG_PATH")
    if env_path is not None:
        p = Path(env_path)
        return p if p.is_file() else None

    current = (start or Path.cwd()).resolve()
    for directory in (current, *current.parents):
        candidate = directory / _TOML_FILENAME
        if candidate.is_file():
            return candidate
    return None


def _load_toml(path: Path | None = None) -> dict[str, Any]:
    """Load and return the ``[ratex]`` table, or ``{}`` if missing."""
    toml_path = path or _find_toml()
    if toml_path is None:
        return {}
    try:
        with open(toml_path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{toml_path}: {exc}") from exc
    return dict(data.get("ratex", data))


# ---------------------------------------------------------------------------
# Config dataclass
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RatexConfig:
    r"""Top-level configuration for transcoding, rendering and benchmarks.

    Parameters
    ----------
    cache_capacity:
        Number of 16x16 blocks in the texture block cache pool. Must exceed
        the per-frame visible working set or the mark pass fails with
        :class:`~ratex.exceptions.CacheFullError`.

        TOML: ``cache_capacity``  |  Env: ``RATEX_CACHE_CAPACITY``
    workers:
        Worker threads for the decode pass. ``None`` means
        ``os.cpu_count()``.

        TOML: ``workers``  |  Env: ``RATEX_WORKERS``
    filter:
        Resolve filter: ``nearest``, ``bilinear`` or ``bilinear_clamped``.

        TOML: ``filter``  |  Env: ``RATEX_FILTER``
    enable_mipmaps:
        Select mip levels from screen-space uv footprints. When off, every
        pixel samples level 0.

        TOML: ``enable_mipmaps``  |  Env: ``RATEX_ENABLE_MIPMAPS``
    enable_cache:
        Keep visible blocks across frames. When off, the update pass
        evicts everything and each frame decodes its full visible set.

        TOML: ``enable_cache``  |  Env: ``RATEX_ENABLE_CACHE``
    symbol_decoder:
        Huffman symbol strategy: ``table``, ``sequential`` or ``ballot``.

        TOML: ``symbol_decoder``  |  Env: ``RATEX_SYMBOL_DECODER``
    quality:
        JPEG quality (1-100) used when encoding mip levels.

        TOML: ``quality``  |  Env: ``RATEX_QUALITY``
    viewport_width, viewport_height:
        Default framebuffer size.

        TOML: ``viewport_width`` / ``viewport_height``  |
        Env: ``RATEX_VIEWPORT_WIDTH`` / ``RATEX_VIEWPORT_HEIGHT``
    repetitions:
        Benchmark repetitions of the camera path.

        TOML: ``repetitions``  |  Env: ``RATEX_REPETITIONS``
    frames:
        Viewpoints per camera path.

        TOML: ``frames``  |  Env: ``RATEX_FRAMES``
    rotation_step:
        Yaw increment in degrees between rotation-path frames.

        TOML: ``rotation_step``  |  Env: ``RATEX_ROTATION_STEP``
    eye_separation:
        Stereo interpupillary distance in scene units (metres).

        TOML: ``eye_separation``  |  Env: ``RATEX_EYE_SEPARATION``
    background:
        RGB colour of pixels not covered by geometry.

        TOML: ``background``
    log_level:
        Level for the CLI's log handler.

        TOML: ``log_level``  |  Env: ``RATEX_LOG_LEVEL``
    """

    cache_capacity: int = 65536
    workers: int | None = None
    filter: str = "bilinear"
    enable_mipmaps: bool = True
    enable_cache: bool = True
    symbol_decoder: str = "table"
    quality: int = 80
    viewport_width: int = 960
    viewport_height: int = 540
    repetitions: int = 5
    frames: int = 60
    rotation_step: float = 6.0
    eye_separation: float = 0.064
    background: tuple[int, int, int] = (0, 0, 0)
    log_level: str = "WARNING"

    @property
    def filter_mode(self) -> FilterMode:
        return FilterMode(self.filter)

    @property
    def effective_workers(self) -> int:
        return self.workers if self.workers is not None else (os.cpu_count() or 1)

    def validate(self) -> RatexConfig:
        """Check value ranges; return ``self`` so calls can be chained.

        Raises
        ------
        ConfigurationError
            With a message naming the offending setting and its fix.
        """
        if self.cache_capacity < 1:
            raise ConfigurationError(
                f"cache_capacity must be >= 1 (got {self.cache_capacity}); "
                "size it above the number of MCUs visible in one frame"
            )
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1 (got {self.workers})")
        valid_filters = [m.value for m in FilterMode]
        if self.filter not in valid_filters:
            raise ConfigurationError(
                f"unknown filter {self.filter!r}; choose one of {valid_filters}"
            )
        if self.symbol_decoder not in SYMBOL_DECODERS:
            raise ConfigurationError(
                f"unknown symbol_decoder {self.symbol_decoder!r}; "
                f"choose one of {list(SYMBOL_DECODERS)}"
            )
        if not 1 <= self.quality <= 100:
            raise ConfigurationError(f"quality must be in 1..100 (got {self.quality})")
        if self.viewport_width < 1 or self.viewport_height < 1:
            raise ConfigurationError(
                "viewport must be at least 1x1 "
                f"(got {self.viewport_width}x{self.viewport_height})"
            )
        if self.repetitions < 1:
            raise ConfigurationError(
                f"repetitions must be >= 1 (got {self.repetitions})"
            )
        if self.frames < 1:
            raise ConfigurationError(f"frames must be >= 1 (got {self.frames})")
        if len(self.background) != 3 or any(
            not 0 <= c <= 255 for c in self.background
        ):
            raise ConfigurationError(
                f"background must be three values in 0..255 (got {self.background})"
            )
        return self

    @classmethod
    def from_env(
        cls, *, config_path: Path | None = None, **overrides: Any
    ) -> RatexConfig:
        """Build a config from TOML file + env vars + explicit overrides.

        Resolution order (highest precedence first):

        1. **overrides**: keyword arguments passed directly
        2. **env vars**: ``RATEX_*`` environment variables
        3. **TOML file**: ``ratex.toml`` (searched upward from cwd)
        4. **defaults**: built-in dataclass defaults
        """
        toml = _load_toml(config_path)
        defaults = cls()

        try:
            values: dict[str, Any] = {
                "cache_capacity": _env_int(
                    "RATEX_CACHE_CAPACITY",
                    int(toml.get("cache_capacity", defaults.cache_capacity)),
                ),
                "workers": _env_int_or_none("RATEX_WORKERS", toml.get("workers")),
                "filter": _env_str(
                    "RATEX_FILTER", str(toml.get("filter", defaults.filter))
                ),
                "enable_mipmaps": _env_bool(
                    "RATEX_ENABLE_MIPMAPS",
                    bool(toml.get("enable_mipmaps", defaults.enable_mipmaps)),
                ),
                "enable_cache": _env_bool(
                    "RATEX_ENABLE_CACHE",
                    bool(toml.get("enable_cache", defaults.enable_cache)),
                ),
                "symbol_decoder": _env_str(
                    "RATEX_SYMBOL_DECODER",
                    str(toml.get("symbol_decoder", defaults.symbol_decoder)),
                ),
                "quality": _env_int(
                    "RATEX_QUALITY", int(toml.get("quality", defaults.quality))
                ),
                "viewport_width": _env_int(
                    "RATEX_VIEWPORT_WIDTH",
                    int(toml.get("viewport_width", defaults.viewport_width)),
                ),
                "viewport_height": _env_int(
                    "RATEX_VIEWPORT_HEIGHT",
                    int(toml.get("viewport_height", defaults.viewport_height)),
                ),
                "repetitions": _env_int(
                    "RATEX_REPETITIONS",
                    int(toml.get("repetitions", defaults.repetitions)),
                ),
                "frames": _env_int(
                    "RATEX_FRAMES", int(toml.get("frames", defaults.frames))
                ),
                "rotation_step": _env_float(
                    "RATEX_ROTATION_STEP",
                    float(toml.get("rotation_step", defaults.rotation_step)),
                ),
                "eye_separation": _env_float(
                    "RATEX_EYE_SEPARATION",
                    float(toml.get("eye_separation", defaults.eye_separation)),
                ),
                "log_level": _env_str(
                    "RATEX_LOG_LEVEL", str(toml.get("log_level", defaults.log_level))
                ).upper(),
            }
        except ValueError as exc:
            raise ConfigurationError(f"invalid numeric setting: {exc}") from exc

        # TOML-only fields (no env var equivalent)
        if "background" in toml:
            values["background"] = tuple(int(c) for c in toml["background"])

        values.update({k: v for k, v in overrides.items() if v is not None})

        return cls(**values).validate()
