"""Tests for the ``ratex`` command line."""

from __future__ import annotations

import io
import json

import numpy as np
import pytest
from conftest import jpeg_with_scan, pillow_jpeg, smooth_image
from PIL import Image

from ratex import cli
from ratex.bench import BenchReport
from ratex.container import read_chain, read_container, write_container
from ratex.encoder import encode_baseline, encode_scan
from ratex.exceptions import CacheFullError, GroupSpanOverflowError
from ratex.imageio import read_image, write_image
from ratex.mcu import decode_texture
from ratex.types import RaTexture

pytestmark = pytest.mark.usefixtures("isolated_env")


@pytest.fixture()
def jpeg_file(tmp_path):
    path = tmp_path / "photo.jpg"
    path.write_bytes(pillow_jpeg(smooth_image(40, 48, seed=11), 80))
    return path


@pytest.fixture()
def chain_file(tmp_path, jpeg_file):
    out = tmp_path / "photo.ratexm"
    assert cli.main(["transcode", str(jpeg_file), str(out), "--texture-id", "3"]) == 0
    return out


class TestTranscode:
    def test_jpeg_to_chain(self, chain_file, capsys):
        chain = read_chain(chain_file)
        assert chain.level_count == 8
        assert chain.texture_id == 3
        assert (chain.levels[0].width, chain.levels[0].height) == (48, 40)
        assert "wrote" in capsys.readouterr().out

    def test_single_level(self, tmp_path, jpeg_file):
        out = tmp_path / "photo.ratex"
        assert cli.main(["transcode", str(jpeg_file), str(out), "--single"]) == 0
        assert isinstance(read_container(out), RaTexture)

    def test_png_source(self, tmp_path):
        source = tmp_path / "art.png"
        write_image(source, smooth_image(32, 32, seed=2))
        out = tmp_path / "art.ratexm"
        args = ["transcode", str(source), str(out), "--quality", "60"]
        assert cli.main(args) == 0
        assert read_chain(out).level_count == 8

    def test_single_needs_jpeg(self, tmp_path, capsys):
        source = tmp_path / "art.png"
        write_image(source, smooth_image(16, 16))
        out = tmp_path / "art.ratex"
        assert cli.main(["transcode", str(source), str(out), "--single"]) == 1
        assert "JPEG" in capsys.readouterr().err

    def test_progressive_rejected(self, tmp_path, capsys):
        buf = io.BytesIO()
        Image.fromarray(smooth_image(32, 32)).save(buf, "JPEG", progressive=True)
        source = tmp_path / "prog.jpg"
        source.write_bytes(buf.getvalue())
        assert cli.main(["transcode", str(source), str(tmp_path / "p.ratexm")]) == 1
        assert "progressive" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert cli.main(["transcode", str(tmp_path / "none.jpg"), "x.ratexm"]) == 1

    def test_texture_id_out_of_range(self, tmp_path, jpeg_file, capsys):
        out = tmp_path / "photo.ratex"
        args = ["transcode", str(jpeg_file), str(out), "--single"]
        assert cli.main([*args, "--texture-id", "9000"]) == 1
        assert "8191" in capsys.readouterr().err
        assert not out.exists()
        assert cli.main([*args, "--texture-id", "8191"]) == 0
        assert read_container(out).texture_id == 8191

    def test_dc_overflow_is_invalid_input(self, tmp_path, capsys):
        coeffs = np.zeros((2, 6, 64), dtype=np.int32)
        coeffs[0, :4, 0] = 2000
        coeffs[1, :4, 0] = 4000
        template = encode_baseline(smooth_image(16, 32), 50)
        source = tmp_path / "overflow.jpg"
        source.write_bytes(jpeg_with_scan(template, encode_scan(coeffs)))
        out = tmp_path / "overflow.ratex"
        assert cli.main(["transcode", str(source), str(out), "--single"]) == 1
        assert "4000" in capsys.readouterr().err


class TestDecodeAndInfo:
    def test_decode_level(self, tmp_path, chain_file):
        out = tmp_path / "level1.png"
        assert cli.main(["decode", str(chain_file), str(out), "--mip", "1"]) == 0
        expected = decode_texture(read_chain(chain_file).levels[1])
        np.testing.assert_array_equal(read_image(out), expected)
        assert expected.shape == (20, 24, 3)

    def test_mip_out_of_range(self, tmp_path, chain_file, capsys):
        out = tmp_path / "x.png"
        assert cli.main(["decode", str(chain_file), str(out), "--mip", "8"]) == 1
        assert "out of range" in capsys.readouterr().err

    def test_corrupt_container(self, tmp_path, chain_file):
        data = bytearray(chain_file.read_bytes())
        data[-5] ^= 0xFF
        bad = tmp_path / "bad.ratexm"
        bad.write_bytes(bytes(data))
        assert cli.main(["decode", str(bad), str(tmp_path / "x.png")]) == 1

    def test_info(self, chain_file, capsys):
        assert cli.main(["info", str(chain_file)]) == 0
        out = capsys.readouterr().out
        assert "level(s)" in out
        assert "overhead" in out


class TestRender:
    def _demo_args(self, tmp_path, *extra):
        return [
            "render",
            "demo",
            "--frames",
            "2",
            "--reps",
            "1",
            "--width",
            "64",
            "--height",
            "36",
            "--texture-size",
            "32",
            "--quality",
            "60",
            "--workers",
            "1",
            "--cache-capacity",
            "4096",
            "--json",
            str(tmp_path / "report.json"),
            *extra,
        ]

    def test_demo_report(self, tmp_path, capsys):
        assert cli.main(self._demo_args(tmp_path, "--filter", "nearest")) == 0
        report = BenchReport.from_json((tmp_path / "report.json").read_text())
        assert report.viewpoints == 2
        assert report.repetitions == 1
        assert report.config["filter"] == "nearest"
        assert report.decoded_counts()[0][0] > 0
        assert "max-of-medians" in capsys.readouterr().out

    def test_stereo_and_frames(self, tmp_path, capsys):
        frames = tmp_path / "frames"
        args = self._demo_args(tmp_path, "--stereo", "--out", str(frames))
        assert cli.main(args) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["stereo"]["min_shared_over_union"] >= 0.5
        assert (frames / "frame_0000_left.png").is_file()
        assert "shared/union" in capsys.readouterr().out

    def test_no_mip_flag(self, tmp_path):
        assert cli.main(self._demo_args(tmp_path, "--no-mip", "--no-cache")) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["config"]["enable_mipmaps"] is False
        assert report["config"]["enable_cache"] is False

    def test_scene_manifest(self, tmp_path, chain_file):
        (tmp_path / "quad.obj").write_text(
            "v -1 -1 -2\nv 1 -1 -2\nv 1 1 -2\nv -1 1 -2\n"
            "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
            "usemtl photo\nf 1/1 2/2 3/3 4/4\n"
        )
        manifest = {
            "mesh": "quad.obj",
            "materials": {"photo": 3},
            "textures": {"3": chain_file.name},
        }
        scene = tmp_path / "scene.json"
        scene.write_text(json.dumps(manifest))
        args = [
            "render",
            str(scene),
            "--path",
            "static",
            "--frames",
            "2",
            "--reps",
            "1",
            "--width",
            "32",
            "--height",
            "32",
            "--json",
            str(tmp_path / "r.json"),
        ]
        assert cli.main(args) == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["samples"][0]["mcus_decoded"] > 0
        assert report["samples"][1]["mcus_decoded"] == 0

    def test_bad_scene(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        scene.write_text("{}")
        assert cli.main(["render", str(scene)]) == 1
        assert "manifest" in capsys.readouterr().err

    def test_cache_too_small_is_internal(self, tmp_path, capsys):
        args = self._demo_args(tmp_path)
        args[args.index("4096")] = "1"
        assert cli.main(args) == 2
        assert "cache_capacity" in capsys.readouterr().err


class TestMetrics:
    def test_two_images(self, tmp_path, capsys):
        image = smooth_image(24, 24, seed=3)
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        write_image(a, image)
        write_image(b, image)
        assert cli.main(["metrics", str(a), str(b)]) == 0
        out = capsys.readouterr().out
        assert "inf" in out
        assert "1.0000" in out

    def test_roundtrip(self, tmp_path, capsys):
        source = tmp_path / "src.png"
        write_image(source, smooth_image(32, 48, seed=4))
        args = ["metrics", "--roundtrip", str(source), "--quality", "70"]
        assert cli.main(args) == 0
        out = capsys.readouterr().out
        assert "PSNR" in out
        assert "bpp" in out

    def test_needs_two_images(self, tmp_path, capsys):
        source = tmp_path / "a.png"
        write_image(source, smooth_image(8, 8))
        assert cli.main(["metrics", str(source)]) == 1
        assert "two images" in capsys.readouterr().err

    def test_size_mismatch(self, tmp_path, capsys):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        write_image(a, smooth_image(8, 8))
        write_image(b, smooth_image(8, 16))
        assert cli.main(["metrics", str(a), str(b)]) == 1
        assert "shape" in capsys.readouterr().err


class TestExitCodes:
    def test_invalid_env_config(self, monkeypatch, chain_file, capsys):
        monkeypatch.setenv("RATEX_CACHE_CAPACITY", "0")
        assert cli.main(["info", str(chain_file)]) == 1
        assert "cache_capacity" in capsys.readouterr().err

    def test_explicit_config_file(self, tmp_path, chain_file):
        config = tmp_path / "custom.toml"
        config.write_text('[ratex]\nsymbol_decoder = "ballot"\n')
        out = tmp_path / "x.png"
        args = ["--config", str(config), "decode", str(chain_file), str(out)]
        assert cli.main(args) == 0
        assert cli.main(["--config", str(tmp_path / "no.toml"), "info", "x"]) == 1

    def test_unexpected_exception(self, monkeypatch, chain_file):
        def boom(args):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "cmd_info", boom)
        assert cli.main(["info", str(chain_file)]) == 2

    def test_other_ratex_error(self, monkeypatch, chain_file):
        def full(args):
            raise CacheFullError("full")

        monkeypatch.setattr(cli, "cmd_info", full)
        assert cli.main(["info", str(chain_file)]) == 2

    def test_transcode_errors_are_invalid_input(self, monkeypatch, chain_file):
        def overflow(args):
            raise GroupSpanOverflowError("relative offsets are 16-bit")

        monkeypatch.setattr(cli, "cmd_info", overflow)
        assert cli.main(["info", str(chain_file)]) == 1

    def test_unknown_flag(self, capsys):
        assert cli.main(["render", "demo", "--no-such-flag"]) == 1
        assert "--no-such-flag" in capsys.readouterr().err

    def test_missing_argument(self, capsys):
        assert cli.main(["render"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_command(self):
        assert cli.main([]) == 1

    def test_help_exits_cleanly(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "transcode" in capsys.readouterr().out

    def test_single_texture_container_decodes(self, tmp_path, small_texture):
        path = tmp_path / "one.ratex"
        write_container(path, small_texture)
        out = tmp_path / "one.png"
        assert cli.main(["decode", str(path), str(out)]) == 0
        assert read_image(out).shape == (40, 48, 3)
