"""``ratex`` command line.

Usage::

    ratex transcode photo.jpg photo.ratexm --quality 80 --texture-id 3
    ratex decode photo.ratexm level2.png --mip 2
    ratex info photo.ratexm
    ratex render scene.json --path rotate --frames 60 --reps 5 --json report.json
    ratex render demo --stereo --frames 10
    ratex metrics reference.png rendered.png
    ratex metrics --roundtrip photo.png --quality 50

Exit status: 0 on success, 1 for invalid input or configuration, 2 for
internal errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from ratex.bench import BenchReport, run_benchmark
from ratex.codestream import parse_jpeg
from ratex.config import SYMBOL_DECODERS, RatexConfig
from ratex.container import read_chain, read_container, write_container
from ratex.decoders import get_symbol_decoder
from ratex.encoder import encode_baseline
from ratex.exceptions import (
    CodestreamError,
    ConfigurationError,
    ContainerError,
    ImageError,
    MetricError,
    RatexError,
    SceneError,
    TranscodeError,
)
from ratex.imageio import read_image, write_image
from ratex.mcu import decode_texture
from ratex.metrics import psnr, ssim
from ratex.scene import build_demo_scene, load_scene, make_path
from ratex.transcoder import (
    MAX_TEXTURE_ID,
    build_mip_chain,
    compute_overhead,
    transcode,
    transcode_jpeg_chain,
)
from ratex.types import FilterMode, MipChain, RaTexture

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTERNAL = 2

_JPEG_SOI = b"\xff\xd8"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _load_config(args: argparse.Namespace, **overrides: object) -> RatexConfig:
    return RatexConfig.from_env(config_path=args.config, **overrides)


def _overhead_table(title: str, levels: Sequence[RaTexture]) -> Table:
    table = Table(title=title)
    for column in ("mip", "size", "MCUs", "index bpp", "DC +/-", "padding"):
        table.add_column(column, justify="right")
    table.add_column("overhead bpp", justify="right")
    table.add_column("unpadded bpp", justify="right")
    for k, ra in enumerate(levels):
        report = compute_overhead(ra)
        table.add_row(
            str(k),
            f"{ra.width}x{ra.height}",
            str(ra.mcu_count),
            f"{report.index_bits / report.pixel_count:.4f}",
            f"+{report.dc_added_bits} / -{report.dc_removed_bits}",
            str(report.padding_bits),
            f"{report.effective_bpp:.4f}",
            f"{report.effective_bpp_unpadded:.4f}",
        )
    return table


def _format_ms(seconds: float) -> str:
    return f"{seconds * 1e3:.2f}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_transcode(args: argparse.Namespace) -> int:
    config = _load_config(args, quality=args.quality)
    data = Path(args.input).read_bytes()
    symbols = get_symbol_decoder(config.symbol_decoder)
    if args.single:
        if not data.startswith(_JPEG_SOI):
            raise ImageError(f"{args.input} is not a JPEG; --single needs one")
        obj: RaTexture | MipChain = transcode(
            parse_jpeg(data), args.texture_id, symbols
        )
        levels: Sequence[RaTexture] = [obj]
    elif data.startswith(_JPEG_SOI):
        obj = transcode_jpeg_chain(data, config.quality, args.texture_id, symbols)
        levels = obj.levels
    else:
        obj = build_mip_chain(
            read_image(args.input), config.quality, args.texture_id, symbols
        )
        levels = obj.levels
    size = write_container(args.output, obj)
    console.print(_overhead_table(f"{args.input} -> {args.output}", levels))
    console.print(f"wrote {size} bytes")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    config = _load_config(args)
    chain = read_chain(args.input)
    if not 0 <= args.mip < chain.level_count:
        raise ConfigurationError(
            f"--mip {args.mip} out of range; {args.input} has "
            f"{chain.level_count} levels"
        )
    ra = chain.levels[args.mip]
    image = decode_texture(ra, get_symbol_decoder(config.symbol_decoder))
    write_image(args.output, image)
    console.print(f"decoded mip {args.mip} ({ra.width}x{ra.height}) -> {args.output}")
    return EXIT_OK


def cmd_info(args: argparse.Namespace) -> int:
    obj = read_container(args.input)
    levels = obj.levels if isinstance(obj, MipChain) else (obj,)
    first = levels[0]
    kind = "mip chain" if isinstance(obj, MipChain) else "single texture"
    console.print(
        f"[bold]{args.input}[/bold]: {kind}, texture id {first.texture_id}, "
        f"{len(levels)} level(s)"
    )
    table = Table(title="levels")
    for column in ("mip", "size", "MCU grid", "index groups", "blob bytes"):
        table.add_column(column, justify="right")
    for k, ra in enumerate(levels):
        table.add_row(
            str(k),
            f"{ra.width}x{ra.height}",
            f"{ra.mcu_cols}x{ra.mcu_rows}",
            str(ra.index_table.group_count),
            str(len(ra.entropy_blob)),
        )
    console.print(table)
    console.print(_overhead_table("overhead", levels))
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    config = _load_config(
        args,
        cache_capacity=args.cache_capacity,
        workers=args.workers,
        filter=args.filter,
        enable_mipmaps=False if args.no_mip else None,
        enable_cache=False if args.no_cache else None,
        symbol_decoder=args.symbol_decoder,
        repetitions=args.reps,
        frames=args.frames,
        rotation_step=args.step,
        viewport_width=args.width,
        viewport_height=args.height,
        quality=args.quality,
    )
    viewport = (config.viewport_width, config.viewport_height)
    if args.scene == "demo":
        scene, camera = build_demo_scene(args.texture_size, config.quality, viewport)
    else:
        scene, camera = load_scene(args.scene)
        camera = camera.with_viewport(*viewport)
    path = make_path(args.path, camera, config.frames, config.rotation_step)
    if args.path == "rotate" and not path.closes:
        logger.warning(
            "rotation path of %d x %.1f deg does not close a full turn",
            config.frames,
            config.rotation_step,
        )

    report = run_benchmark(
        scene, path, config, stereo=args.stereo, frame_dir=args.out
    )
    _print_report(report)
    if args.json is not None:
        Path(args.json).write_text(report.to_json())
        console.print(f"report written to {args.json}")
    return EXIT_OK


def _print_report(report: BenchReport) -> None:
    frames = Table(title="frames (repetition 0)")
    frames.add_column("view", justify="right")
    for column in ("decoded", "reused", "mark ms", "decode ms", "resolve ms"):
        frames.add_column(column, justify="right")
    stereo = report.stereo is not None
    if stereo:
        frames.add_column("shared/union", justify="right")
        frames.add_column("shared/right", justify="right")
    for s in report.frame_samples(0):
        row = [
            str(s.viewpoint),
            str(s.mcus_decoded),
            str(s.mcus_reused),
            _format_ms(s.pass_seconds["mark"]),
            _format_ms(s.pass_seconds["decode"]),
            _format_ms(s.pass_seconds["resolve"]),
        ]
        if stereo:
            row += [f"{s.shared_over_union:.3f}", f"{s.shared_over_right:.3f}"]
        frames.add_row(*row)
    console.print(frames)

    summary = Table(
        title=f"summary ({report.viewpoints} views x {report.repetitions} reps)"
    )
    summary.add_column("metric")
    summary.add_column("value", justify="right")
    summary.add_row(
        "pipeline max-of-medians ms", _format_ms(report.max_of_medians_seconds)
    )
    summary.add_row("pipeline mean ms", _format_ms(report.mean_seconds))
    summary.add_row("pipeline p99 ms", _format_ms(report.p99_seconds))
    for name, seconds in report.pass_max_of_medians.items():
        summary.add_row(f"{name} max-of-medians ms", _format_ms(seconds))
    summary.add_row("MCUs decoded (all reps)", str(report.mcus_decoded_total))
    summary.add_row("MCUs decoded (max frame)", str(report.mcus_decoded_max))
    summary.add_row("decode throughput MCU/s", f"{report.decode_throughput:.0f}")
    summary.add_row("cache hit rate", f"{report.cache['hit_rate']:.3f}")
    if report.stereo is not None:
        summary.add_row(
            "stereo shared/union min | mean",
            f"{report.stereo.min_shared_over_union:.3f} | "
            f"{report.stereo.mean_shared_over_union:.3f}",
        )
        summary.add_row(
            "stereo shared/right min | mean",
            f"{report.stereo.min_shared_over_right:.3f} | "
            f"{report.stereo.mean_shared_over_right:.3f}",
        )
    console.print(summary)


def _format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def cmd_metrics(args: argparse.Namespace) -> int:
    table = Table(title="quality")
    table.add_column("metric")
    table.add_column("value", justify="right")
    if args.roundtrip is not None:
        if args.images:
            raise ConfigurationError("--roundtrip takes no positional images")
        config = _load_config(args, quality=args.quality)
        source = read_image(args.roundtrip)
        jpeg = encode_baseline(source, config.quality)
        ra = transcode(parse_jpeg(jpeg))
        decoded = decode_texture(ra)
        pixels = ra.width * ra.height
        jpeg_bpp = 8 * len(jpeg) / pixels
        table.add_row("quality", str(config.quality))
        table.add_row("PSNR dB", _format_db(psnr(source, decoded)))
        table.add_row("SSIM", f"{ssim(source, decoded):.4f}")
        table.add_row("JPEG bpp", f"{jpeg_bpp:.4f}")
        table.add_row(
            "JPEG + random access bpp",
            f"{jpeg_bpp + compute_overhead(ra).effective_bpp:.4f}",
        )
    else:
        if len(args.images) != 2:
            raise ConfigurationError("metrics needs two images or --roundtrip IMAGE")
        a, b = (read_image(p) for p in args.images)
        table.add_row("PSNR dB", _format_db(psnr(a, b)))
        table.add_row("SSIM", f"{ssim(a, b):.4f}")
    console.print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors are invalid input, not internal failures."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _texture_id(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= MAX_TEXTURE_ID:
        raise argparse.ArgumentTypeError(
            f"{value} is outside 0..{MAX_TEXTURE_ID} (13 bits)"
        )
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ratex",
        description="Random-access JPEG textures: transcode, inspect, render, measure",
    )
    parser.add_argument(
        "--config", type=Path, default=None, help="Path to a ratex.toml file"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log at DEBUG level"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transcode", help="JPEG or image -> .ratexm mip chain")
    p.add_argument("input", help="Baseline 4:2:0 JPEG, or any image Pillow reads")
    p.add_argument("output", help="Output container (.ratexm, or .ratex with --single)")
    p.add_argument("--quality", type=int, default=None, help="JPEG quality of mips")
    p.add_argument(
        "--texture-id", type=_texture_id, default=0, help="13-bit texture id"
    )
    p.add_argument(
        "--single", action="store_true", help="Write only level 0 as a .ratex file"
    )
    p.set_defaults(func=cmd_transcode)

    p = sub.add_parser("decode", help="Decode one mip level to an image")
    p.add_argument("input", help=".ratexm or .ratex container")
    p.add_argument("output", help="Output image (.png, .ppm)")
    p.add_argument("--mip", type=int, default=0, help="Level to decode (default: 0)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("info", help="Print container layout and overhead")
    p.add_argument("input", help=".ratexm or .ratex container")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("render", help="Render a camera path and report timings")
    p.add_argument("scene", help="Scene manifest (.json) or 'demo'")
    p.add_argument(
        "--path", choices=["rotate", "static", "orbit"], default="rotate"
    )
    p.add_argument("--frames", type=int, default=None, help="Viewpoints on the path")
    p.add_argument("--reps", type=int, default=None, help="Repetitions of the path")
    p.add_argument("--step", type=float, default=None, help="Rotation step in degrees")
    p.add_argument(
        "--filter", choices=[m.value for m in FilterMode], default=None
    )
    p.add_argument("--stereo", action="store_true", help="Render eye pairs")
    p.add_argument("--no-mip", action="store_true", help="Always sample level 0")
    p.add_argument(
        "--no-cache", action="store_true", help="Evict every block after each frame"
    )
    p.add_argument("--cache-capacity", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--symbol-decoder", choices=list(SYMBOL_DECODERS), default=None)
    p.add_argument("--width", type=int, default=None, help="Viewport width")
    p.add_argument("--height", type=int, default=None, help="Viewport height")
    p.add_argument("--quality", type=int, default=None, help="Demo texture quality")
    p.add_argument(
        "--texture-size", type=int, default=256, help="Demo texture edge length"
    )
    p.add_argument("--out", type=Path, default=None, help="Directory for PNG frames")
    p.add_argument("--json", type=Path, default=None, help="Write the report here")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", help="PSNR / SSIM of two images or a round trip")
    p.add_argument("images", nargs="*", help="Reference and test image")
    p.add_argument("--roundtrip", default=None, help="Encode, transcode and decode")
    p.add_argument("--quality", type=int, default=None)
    p.set_defaults(func=cmd_metrics)
    return parser


def _print_error(label: str, exc: BaseException) -> None:
    message = escape(str(exc))
    err_console.print(f"[bold red]{label}:[/bold red] {message}", highlight=False)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        level = "DEBUG" if args.verbose else _load_config(args).log_level
        _setup_logging(level)
        return int(args.func(args))
    except (
        ConfigurationError,
        SceneError,
        ImageError,
        CodestreamError,
        ContainerError,
        MetricError,
        TranscodeError,
        OSError,
    ) as exc:
        _print_error("error", exc)
        return EXIT_INVALID
    except RatexError as exc:
        logger.exception("internal error")
        _print_error("internal error", exc)
        return EXIT_INTERNAL
    except Exception as exc:
        logger.exception("unexpected failure")
        _print_error("internal error", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
