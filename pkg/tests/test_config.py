"""Tests for RatexConfig layering: defaults, TOML, environment, overrides."""

from __future__ import annotations

import pytest

from ratex.config import RatexConfig
from ratex.exceptions import ConfigurationError
from ratex.types import FilterMode

pytestmark = pytest.mark.usefixtures("isolated_env")

TOML = """\
[ratex]
cache_capacity = 1024
filter = "nearest"
quality = 60
background = [10, 20, 30]
"""


class TestDefaults:
    def test_values(self):
        config = RatexConfig()
        assert config.cache_capacity == 65536
        assert config.filter_mode is FilterMode.BILINEAR
        assert config.enable_mipmaps
        assert config.enable_cache
        assert config.symbol_decoder == "table"
        assert config.repetitions == 5
        assert config.frames == 60
        assert config.rotation_step == 6.0
        assert config.eye_separation == 0.064
        assert (config.viewport_width, config.viewport_height) == (960, 540)

    def test_from_env_without_sources(self):
        assert RatexConfig.from_env() == RatexConfig()

    def test_effective_workers(self):
        assert RatexConfig(workers=3).effective_workers == 3
        assert RatexConfig().effective_workers >= 1


class TestLayering:
    def test_toml_file(self, tmp_path):
        path = tmp_path / "custom.toml"
        path.write_text(TOML)
        config = RatexConfig.from_env(config_path=path)
        assert config.cache_capacity == 1024
        assert config.filter == "nearest"
        assert config.quality == 60
        assert config.background == (10, 20, 30)

    def test_toml_found_from_cwd(self, tmp_path, monkeypatch):
        monkeypatch.delenv("RATEX_CONFIG_PATH")
        (tmp_path / "ratex.toml").write_text(TOML)
        nested = tmp_path / "a" / "b"
        nested.mkdir(parents=True)
        monkeypatch.chdir(nested)
        assert RatexConfig.from_env().cache_capacity == 1024

    def test_config_path_env(self, tmp_path, monkeypatch):
        path = tmp_path / "elsewhere.toml"
        path.write_text(TOML)
        monkeypatch.setenv("RATEX_CONFIG_PATH", str(path))
        assert RatexConfig.from_env().quality == 60

    def test_env_beats_toml(self, tmp_path, monkeypatch):
        path = tmp_path / "custom.toml"
        path.write_text(TOML)
        monkeypatch.setenv("RATEX_CACHE_CAPACITY", "2048")
        monkeypatch.setenv("RATEX_ENABLE_MIPMAPS", "0")
        monkeypatch.setenv("RATEX_WORKERS", "3")
        monkeypatch.setenv("RATEX_LOG_LEVEL", "debug")
        config = RatexConfig.from_env(config_path=path)
        assert config.cache_capacity == 2048
        assert not config.enable_mipmaps
        assert config.workers == 3
        assert config.log_level == "DEBUG"
        assert config.filter == "nearest"

    def test_overrides_beat_env(self, monkeypatch):
        monkeypatch.setenv("RATEX_FILTER", "nearest")
        monkeypatch.setenv("RATEX_ROTATION_STEP", "12.5")
        config = RatexConfig.from_env(filter="bilinear_clamped", frames=None)
        assert config.filter_mode is FilterMode.BILINEAR_CLAMPED
        assert config.rotation_step == 12.5
        assert config.frames == 60

    def test_bool_spellings(self, monkeypatch):
        for value, expected in (("true", True), ("YES", True), ("off", False)):
            monkeypatch.setenv("RATEX_ENABLE_CACHE", value)
            assert RatexConfig.from_env().enable_cache is expected


class TestValidation:
    @pytest.mark.parametrize(
        ("kwargs", "message"),
        [
            ({"cache_capacity": 0}, "cache_capacity"),
            ({"workers": 0}, "workers"),
            ({"filter": "trilinear"}, "unknown filter"),
            ({"symbol_decoder": "magic"}, "symbol_decoder"),
            ({"quality": 0}, "quality"),
            ({"viewport_width": 0}, "viewport"),
            ({"repetitions": 0}, "repetitions"),
            ({"frames": 0}, "frames"),
            ({"background": (0, 0, 300)}, "background"),
        ],
    )
    def test_invalid_values(self, kwargs, message):
        with pytest.raises(ConfigurationError, match=message):
            RatexConfig(**kwargs).validate()

    def test_invalid_numeric_env(self, monkeypatch):
        monkeypatch.setenv("RATEX_WORKERS", "many")
        with pytest.raises(ConfigurationError, match="invalid numeric"):
            RatexConfig.from_env()

    def test_from_env_validates(self, monkeypatch):
        monkeypatch.setenv("RATEX_SYMBOL_DECODER", "fast")
        with pytest.raises(ConfigurationError, match="symbol_decoder"):
            RatexConfig.from_env()

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[ratex\ncache_capacity = ")
        with pytest.raises(ConfigurationError, match="broken.toml"):
            RatexConfig.from_env(config_path=path)
