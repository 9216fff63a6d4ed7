"""ratex: random-access JPEG textures with a deferred decoding renderer."""

from dotenv import load_dotenv

load_dotenv()

from ratex.bench import BenchReport, run_benchmark  # noqa: E402
from ratex.cache import BlockCache, CacheStats  # noqa: E402
from ratex.codestream import decode_reference_image, parse_jpeg  # noqa: E402
from ratex.config import RatexConfig  # noqa: E402
from ratex.container import (  # noqa: E402
    read_chain,
    read_container,
    write_container,
)
from ratex.decoders import SymbolDecoder, get_symbol_decoder  # noqa: E402
from ratex.encoder import encode_baseline  # noqa: E402
from ratex.exceptions import (  # noqa: E402
    CacheFullError,
    ConfigurationError,
    ContainerError,
    MalformedStreamError,
    McuDecodeError,
    MissingBlockError,
    RatexError,
    SceneError,
    UnsupportedFormatError,
)
from ratex.mcu import decode_mcu, decode_texture  # noqa: E402
from ratex.metrics import max_of_medians, psnr, ssim  # noqa: E402
from ratex.raster import GBuffer, rasterize_gbuffer  # noqa: E402
from ratex.renderer import (  # noqa: E402
    DeferredRenderer,
    decode_pass,
    mark_pass,
    render_frame,
    render_stereo,
    resolve_pass,
)
from ratex.scene import (  # noqa: E402
    Camera,
    CameraPath,
    Mesh,
    Scene,
    build_demo_scene,
    load_scene,
    orbit_path,
    rotation_path,
    static_path,
)
from ratex.transcoder import (  # noqa: E402
    build_mip_chain,
    compute_overhead,
    transcode,
    transcode_jpeg_chain,
)
from ratex.types import (  # noqa: E402
    CacheKey,
    FilterMode,
    FrameStats,
    MipChain,
    OverheadReport,
    RaTexture,
    StereoStats,
)

__all__ = [
    "BenchReport",
    "BlockCache",
    "CacheFullError",
    "CacheKey",
    "CacheStats",
    "Camera",
    "CameraPath",
    "ConfigurationError",
    "ContainerError",
    "DeferredRenderer",
    "FilterMode",
    "FrameStats",
    "GBuffer",
    "MalformedStreamError",
    "McuDecodeError",
    "Mesh",
    "MipChain",
    "MissingBlockError",
    "OverheadReport",
    "RaTexture",
    "RatexConfig",
    "RatexError",
    "Scene",
    "SceneError",
    "StereoStats",
    "SymbolDecoder",
    "UnsupportedFormatError",
    "build_demo_scene",
    "build_mip_chain",
    "compute_overhead",
    "decode_mcu",
    "decode_pass",
    "decode_reference_image",
    "decode_texture",
    "encode_baseline",
    "get_symbol_decoder",
    "load_scene",
    "mark_pass",
    "max_of_medians",
    "orbit_path",
    "parse_jpeg",
    "psnr",
    "rasterize_gbuffer",
    "read_chain",
    "read_container",
    "render_frame",
    "render_stereo",
    "resolve_pass",
    "rotation_path",
    "run_benchmark",
    "ssim",
    "static_path",
    "transcode",
    "transcode_jpeg_chain",
    "write_container",
]
