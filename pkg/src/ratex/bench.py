"""Camera-path benchmark with max-of-medians aggregation.

Every repetition replays the whole path from a cold cache, so the counts
of each viewpoint are the same in every repetition; only the timings
vary. Timings are aggregated per viewpoint with the median over
repetitions and across viewpoints with the maximum.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ratex.cache import BlockCache, CacheStats
from ratex.config import RatexConfig
from ratex.imageio import write_image
from ratex.metrics import max_of_medians, percentile
from ratex.renderer import DeferredRenderer
from ratex.scene import CameraPath, Scene
from ratex.types import FrameStats, RGBImage

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PASS_NAMES = ("raster", "mark", "decode", "resolve", "update")

FrameCallback = Callable[[int, int, FrameStats], None]


@dataclass(frozen=True, slots=True)
class FrameSample:
    """Measurements of one viewpoint in one repetition."""

    viewpoint: int
    repetition: int
    pipeline_seconds: float
    pass_seconds: dict[str, float]
    mcus_decoded: int
    mcus_reused: int
    pixels_resolved: int
    shared_over_union: float | None = None
    shared_over_right: float | None = None


@dataclass(frozen=True, slots=True)
class StereoSummary:
    min_shared_over_union: float
    mean_shared_over_union: float
    min_shared_over_right: float
    mean_shared_over_right: float


@dataclass(frozen=True, slots=True)
class BenchReport:
    """Versioned benchmark result; round-trips through JSON.

    ``flip`` and ``lpips`` are reserved for externally computed perceptual
    scores and stay ``None`` here.
    """

    config: dict[str, Any]
    path: dict[str, Any]
    viewpoints: int
    repetitions: int
    samples: tuple[FrameSample, ...]
    max_of_medians_seconds: float
    mean_seconds: float
    p99_seconds: float
    pass_max_of_medians: dict[str, float]
    mcus_decoded_total: int
    mcus_decoded_max: int
    decode_throughput: float
    cache: dict[str, Any]
    stereo: StereoSummary | None = None
    flip: float | None = None
    lpips: float | None = None
    schema_version: int = SCHEMA_VERSION

    def frame_samples(self, repetition: int = 0) -> list[FrameSample]:
        return [s for s in self.samples if s.repetition == repetition]

    def timing_matrix(self, name: str = "pipeline") -> list[list[float]]:
        """``[viewpoint][repetition]`` seconds of the pipeline or one pass."""
        matrix = [[0.0] * self.repetitions for _ in range(self.viewpoints)]
        for s in self.samples:
            value = (
                s.pipeline_seconds if name == "pipeline" else s.pass_seconds[name]
            )
            matrix[s.viewpoint][s.repetition] = value
        return matrix

    def decoded_counts(self) -> list[list[int]]:
        """``[repetition][viewpoint]`` decoded-MCU counts."""
        counts = [[0] * self.viewpoints for _ in range(self.repetitions)]
        for s in self.samples:
            counts[s.repetition][s.viewpoint] = s.mcus_decoded
        return counts

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BenchReport:
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(
                f"bench report schema {version!r} is not supported "
                f"(expected {SCHEMA_VERSION})"
            )
        values = dict(data)
        values["samples"] = tuple(FrameSample(**s) for s in data["samples"])
        if data.get("stereo") is not None:
            values["stereo"] = StereoSummary(**data["stereo"])
        return cls(**values)

    @classmethod
    def from_json(cls, text: str) -> BenchReport:
        return cls.from_dict(json.loads(text))


@dataclass
class _Collector:
    samples: list[FrameSample] = field(default_factory=list)

    def add(
        self,
        viewpoint: int,
        repetition: int,
        stats: FrameStats,
        sharing: tuple[float, float] | None = None,
    ) -> None:
        self.samples.append(
            FrameSample(
                viewpoint=viewpoint,
                repetition=repetition,
                pipeline_seconds=stats.pipeline_seconds,
                pass_seconds={n: stats.pass_seconds.get(n, 0.0) for n in PASS_NAMES},
                mcus_decoded=stats.mcus_decoded,
                mcus_reused=stats.mcus_reused,
                pixels_resolved=stats.pixels_resolved,
                shared_over_union=None if sharing is None else sharing[0],
                shared_over_right=None if sharing is None else sharing[1],
            )
        )


def _save_frame(frame_dir: Path | None, name: str, image: RGBImage) -> None:
    if frame_dir is not None:
        write_image(frame_dir / name, image)


def run_benchmark(
    scene: Scene,
    path: CameraPath,
    config: RatexConfig | None = None,
    *,
    stereo: bool = False,
    frame_dir: str | Path | None = None,
    on_frame: FrameCallback | None = None,
) -> BenchReport:
    """Render *path* ``config.repetitions`` times and aggregate.

    Parameters
    ----------
    stereo:
        Render each pose as an eye pair ``config.eye_separation`` apart
        and report the eyes' MCU sharing.
    frame_dir:
        Directory for PNG frames of the first repetition.
    on_frame:
        Called with ``(repetition, viewpoint, stats)`` after every frame.
    """
    cfg = (config or RatexConfig()).validate()
    out = Path(frame_dir) if frame_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    collector = _Collector()
    cache_stats = None
    for rep in range(cfg.repetitions):
        cache = BlockCache(cfg.cache_capacity)
        renderer = DeferredRenderer(cfg, cache)
        for i, camera in enumerate(path):
            save_dir = out if rep == 0 else None
            sharing: tuple[float, float] | None = None
            if stereo:
                left, right = camera.stereo_pair(cfg.eye_separation)
                img_l, img_r, pair = renderer.render_stereo(scene, left, right)
                stats = pair.frame
                sharing = (pair.shared_over_union, pair.shared_over_right)
                _save_frame(save_dir, f"frame_{i:04d}_left.png", img_l)
                _save_frame(save_dir, f"frame_{i:04d}_right.png", img_r)
            else:
                image, stats = renderer.render(scene, camera)
                _save_frame(save_dir, f"frame_{i:04d}.png", image)
            collector.add(i, rep, stats, sharing)
            if on_frame is not None:
                on_frame(rep, i, stats)
        logger.info(
            "repetition %d/%d: %d frames, %d MCUs decoded",
            rep + 1,
            cfg.repetitions,
            len(path),
            sum(s.mcus_decoded for s in collector.samples if s.repetition == rep),
        )
        cache_stats = cache.stats()

    assert cache_stats is not None
    return _aggregate(cfg, path, collector.samples, cache_stats, stereo)


def _aggregate(
    cfg: RatexConfig,
    path: CameraPath,
    samples: list[FrameSample],
    cache_stats: CacheStats,
    stereo: bool,
) -> BenchReport:
    viewpoints, reps = len(path), cfg.repetitions
    pipeline = np.zeros((viewpoints, reps))
    passes = {name: np.zeros((viewpoints, reps)) for name in PASS_NAMES}
    for s in samples:
        pipeline[s.viewpoint, s.repetition] = s.pipeline_seconds
        for name in PASS_NAMES:
            passes[name][s.viewpoint, s.repetition] = s.pass_seconds[name]

    decoded = sum(s.mcus_decoded for s in samples)
    decode_seconds = float(passes["decode"].sum())
    summary = None
    if stereo:
        union = np.array([s.shared_over_union for s in samples], dtype=np.float64)
        right = np.array([s.shared_over_right for s in samples], dtype=np.float64)
        summary = StereoSummary(
            min_shared_over_union=float(union.min()),
            mean_shared_over_union=float(union.mean()),
            min_shared_over_right=float(right.min()),
            mean_shared_over_right=float(right.mean()),
        )

    config_echo = asdict(cfg)
    config_echo["background"] = list(cfg.background)
    return BenchReport(
        config=config_echo,
        path={"kind": path.kind, "frames": len(path), "step": path.step},
        viewpoints=viewpoints,
        repetitions=reps,
        samples=tuple(samples),
        max_of_medians_seconds=max_of_medians(pipeline),
        mean_seconds=float(pipeline.mean()),
        p99_seconds=percentile(pipeline, 99.0),
        pass_max_of_medians={n: max_of_medians(m) for n, m in passes.items()},
        mcus_decoded_total=decoded,
        mcus_decoded_max=max(s.mcus_decoded for s in samples),
        decode_throughput=decoded / decode_seconds if decode_seconds > 0 else 0.0,
        cache={
            "capacity": cache_stats.capacity,
            "resident": cache_stats.resident,
            "reservations": cache_stats.reservations,
            "hits": cache_stats.hits,
            "evictions": cache_stats.evictions,
            "hit_rate": cache_stats.hit_rate,
        },
        stereo=summary,
    )
