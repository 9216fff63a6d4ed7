"""Scenes, cameras and camera paths.

Conventions: right-handed world, ``+y`` up; a camera with zero yaw,
pitch and roll looks down ``-z``. Texture coordinates address image rows
top to bottom (``v = 0`` is the first row) and wrap in both directions.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from ratex.container import read_chain
from ratex.exceptions import ContainerError, SceneError
from ratex.transcoder import build_mip_chain
from ratex.types import MipChain

# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class Mesh:
    """Triangle mesh bound to one texture.

    Parameters
    ----------
    positions:
        ``(N, 3)`` world-space vertex positions.
    uvs:
        ``(N, 2)`` texture coordinates; values outside [0, 1) repeat.
    faces:
        ``(M, 3)`` vertex indices, counter-clockwise when seen from the
        front.
    texture_id:
        Id of the :class:`~ratex.types.MipChain` sampled by this mesh.
    """

    positions: npt.NDArray[np.float64]
    uvs: npt.NDArray[np.float64]
    faces: npt.NDArray[np.int64]
    texture_id: int
    name: str = ""

    def __post_init__(self) -> None:
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise SceneError(f"mesh {self.name!r}: positions must be (N, 3)")
        if self.uvs.shape != (self.positions.shape[0], 2):
            raise SceneError(f"mesh {self.name!r}: uvs must be (N, 2)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise SceneError(f"mesh {self.name!r}: faces must be (M, 3)")
        if self.faces.size and (
            self.faces.min() < 0 or self.faces.max() >= self.positions.shape[0]
        ):
            raise SceneError(f"mesh {self.name!r}: face index out of range")

    @property
    def triangle_count(self) -> int:
        return int(self.faces.shape[0])

    def offset_uvs(self, du: float, dv: float) -> Mesh:
        return replace(self, uvs=self.uvs + np.array([du, dv]))


def quad_mesh(
    corners: npt.ArrayLike,
    uv_repeat: tuple[float, float],
    texture_id: int,
    name: str = "",
) -> Mesh:
    """Two-triangle quad from four corners given counter-clockwise.

    ``uv_repeat`` is how many times the texture tiles along the first and
    second edge.
    """
    positions = np.asarray(corners, dtype=np.float64).reshape(4, 3)
    su, sv = uv_repeat
    uvs = np.array([[0.0, sv], [su, sv], [su, 0.0], [0.0, 0.0]])
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    return Mesh(positions, uvs, faces, texture_id, name)


@dataclass(frozen=True, slots=True)
class Scene:
    """Meshes plus the mip chains they sample, keyed by texture id."""

    meshes: tuple[Mesh, ...]
    textures: Mapping[int, MipChain] = field(default_factory=dict)

    def __post_init__(self) -> None:
        missing = sorted({m.texture_id for m in self.meshes} - set(self.textures))
        if missing:
            raise SceneError(f"meshes reference textures without mip chains: {missing}")
        for texture_id, chain in self.textures.items():
            if chain.texture_id != texture_id:
                raise SceneError(
                    f"mip chain registered as texture {texture_id} carries id "
                    f"{chain.texture_id}"
                )

    def offset_uvs(self, du: float, dv: float) -> Scene:
        return replace(self, meshes=tuple(m.offset_uvs(du, dv) for m in self.meshes))


# ---------------------------------------------------------------------------
# Camera
# ---------------------------------------------------------------------------


def _rotation(yaw: float, pitch: float, roll: float) -> npt.NDArray[np.float64]:
    y, p, r = (math.radians(a) for a in (yaw, pitch, roll))
    ry = np.array(
        [[math.cos(y), 0, math.sin(y)], [0, 1, 0], [-math.sin(y), 0, math.cos(y)]]
    )
    rx = np.array(
        [[1, 0, 0], [0, math.cos(p), -math.sin(p)], [0, math.sin(p), math.cos(p)]]
    )
    rz = np.array(
        [[math.cos(r), -math.sin(r), 0], [math.sin(r), math.cos(r), 0], [0, 0, 1]]
    )
    return ry @ rx @ rz


@dataclass(frozen=True, slots=True)
class Camera:
    """Pinhole camera.

    Angles are in degrees: positive yaw turns left (about ``+y``), positive
    pitch looks up. ``fov_y`` is the vertical field of view.
    """

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    fov_y: float = 60.0
    near: float = 0.05
    far: float = 100.0
    width: int = 960
    height: int = 540

    def __post_init__(self) -> None:
        if self.near <= 0:
            raise SceneError(f"camera near plane must be > 0 (got {self.near})")
        if self.far <= self.near:
            raise SceneError(
                f"camera far plane {self.far} must lie beyond near plane {self.near}"
            )
        if self.width < 1 or self.height < 1:
            raise SceneError(
                f"viewport must be at least 1x1 ({self.width}x{self.height})"
            )
        if not 0 < self.fov_y < 180:
            raise SceneError(f"fov_y must be in (0, 180) degrees (got {self.fov_y})")

    @property
    def rotation(self) -> npt.NDArray[np.float64]:
        """Columns are the camera's right, up and backward axes in world space."""
        return _rotation(self.yaw, self.pitch, self.roll)

    @property
    def right(self) -> npt.NDArray[np.float64]:
        return self.rotation[:, 0]

    @property
    def forward(self) -> npt.NDArray[np.float64]:
        return -self.rotation[:, 2]

    def view_matrix(self) -> npt.NDArray[np.float64]:
        rot_t = self.rotation.T
        view = np.eye(4)
        view[:3, :3] = rot_t
        view[:3, 3] = -rot_t @ np.asarray(self.position, dtype=np.float64)
        return view

    def projection_matrix(self) -> npt.NDArray[np.float64]:
        f = 1.0 / math.tan(math.radians(self.fov_y) / 2.0)
        aspect = self.width / self.height
        n, fa = self.near, self.far
        return np.array(
            [
                [f / aspect, 0.0, 0.0, 0.0],
                [0.0, f, 0.0, 0.0],
                [0.0, 0.0, (fa + n) / (n - fa), 2.0 * fa * n / (n - fa)],
                [0.0, 0.0, -1.0, 0.0],
            ]
        )

    def view_projection(self) -> npt.NDArray[np.float64]:
        return self.projection_matrix() @ self.view_matrix()

    def translated(self, offset: npt.ArrayLike) -> Camera:
        pos = np.asarray(self.position, dtype=np.float64) + np.asarray(offset)
        return replace(self, position=(float(pos[0]), float(pos[1]), float(pos[2])))

    def with_viewport(self, width: int, height: int) -> Camera:
        return replace(self, width=width, height=height)

    def stereo_pair(self, separation: float) -> tuple[Camera, Camera]:
        """Left and right eye, each offset half of *separation* along ``right``."""
        half = self.right * (separation / 2.0)
        return self.translated(-half), self.translated(half)


# ---------------------------------------------------------------------------
# Camera paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CameraPath:
    """Ordered camera poses (viewpoints) of a benchmark run."""

    kind: str
    cameras: tuple[Camera, ...]
    step: float = 0.0

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self) -> Iterator[Camera]:
        return iter(self.cameras)

    @property
    def closes(self) -> bool:
        """Whether one more step would return to the first pose."""
        if self.kind == "static":
            return True
        total = self.step * len(self.cameras)
        return math.isclose(total % 360.0, 0.0, abs_tol=1e-9) or math.isclose(
            total % 360.0, 360.0, abs_tol=1e-9
        )


def rotation_path(base: Camera, step: float = 6.0, frames: int = 60) -> CameraPath:
    """Yaw rotation in place: frame ``i`` has yaw ``base.yaw + i * step``."""
    if frames < 1:
        raise SceneError(f"a camera path needs at least one frame (got {frames})")
    cameras = tuple(replace(base, yaw=base.yaw + i * step) for i in range(frames))
    return CameraPath("rotate", cameras, step)


def orbit_path(
    base: Camera,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
    frames: int = 60,
) -> CameraPath:
    """Circle *center* at the base camera's horizontal distance, facing it."""
    if frames < 1:
        raise SceneError(f"a camera path needs at least one frame (got {frames})")
    dx = base.position[0] - center[0]
    dz = base.position[2] - center[2]
    radius = math.hypot(dx, dz)
    start = math.atan2(dx, dz)
    step = 360.0 / frames
    cameras = []
    for i in range(frames):
        angle = start + math.radians(i * step)
        pos = (
            center[0] + radius * math.sin(angle),
            base.position[1],
            center[2] + radius * math.cos(angle),
        )
        cameras.append(replace(base, position=pos, yaw=math.degrees(angle)))
    return CameraPath("orbit", tuple(cameras), step)


def static_path(base: Camera, frames: int = 60) -> CameraPath:
    if frames < 1:
        raise SceneError(f"a camera path needs at least one frame (got {frames})")
    return CameraPath("static", (base,) * frames, 0.0)


def make_path(kind: str, base: Camera, frames: int, step: float = 6.0) -> CameraPath:
    """Build a path by name: ``rotate``, ``orbit`` or ``static``."""
    if kind == "rotate":
        return rotation_path(base, step, frames)
    if kind == "orbit":
        return orbit_path(base, frames=frames)
    if kind == "static":
        return static_path(base, frames)
    raise SceneError(f"unknown camera path {kind!r}; choose rotate, orbit or static")


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_obj(
    path: str | Path,
    materials: Mapping[str, int],
    default_texture_id: int | None = None,
) -> list[Mesh]:
    """Read a Wavefront OBJ file into one mesh per material.

    Supports ``v``, ``vt``, ``f`` (polygons are fan-triangulated, negative
    indices allowed) and ``usemtl``; other statements are ignored. ``vt``
    coordinates are flipped vertically so ``v = 0`` is the top image row.

    Raises
    ------
    SceneError
        Malformed statements, unknown materials or faces without ``vt``.
    """
    path = Path(path)
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    corners: dict[int, tuple[list[int], list[int]]] = {}
    current = default_texture_id
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise SceneError(f"cannot read OBJ file {path}: {exc}") from exc

    for lineno, raw in enumerate(lines, start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag, args = parts[0], parts[1:]
        try:
            if tag == "v":
                positions.append([float(a) for a in args[:3]])
            elif tag == "vt":
                u, v = float(args[0]), float(args[1])
                texcoords.append([u, 1.0 - v])
            elif tag == "usemtl":
                name = " ".join(args)
                if name not in materials:
                    raise SceneError(
                        f"{path}:{lineno}: material {name!r} not in manifest"
                    )
                current = materials[name]
            elif tag == "f":
                if current is None:
                    raise SceneError(f"{path}:{lineno}: face before any usemtl")
                vi, ti = [], []
                for token in args:
                    fields = token.split("/")
                    if len(fields) < 2 or not fields[1]:
                        raise SceneError(f"{path}:{lineno}: face vertex without vt")
                    vi.append(_obj_index(int(fields[0]), len(positions)))
                    ti.append(_obj_index(int(fields[1]), len(texcoords)))
                if len(vi) < 3:
                    raise SceneError(
                        f"{path}:{lineno}: face with fewer than 3 vertices"
                    )
                pos_idx, uv_idx = corners.setdefault(current, ([], []))
                for k in range(1, len(vi) - 1):
                    pos_idx += [vi[0], vi[k], vi[k + 1]]
                    uv_idx += [ti[0], ti[k], ti[k + 1]]
        except (ValueError, IndexError) as exc:
            raise SceneError(f"{path}:{lineno}: {exc}") from exc

    pos_arr = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    uv_arr = np.asarray(texcoords, dtype=np.float64).reshape(-1, 2)
    meshes: list[Mesh] = []
    for texture_id, (pos_idx, uv_idx) in sorted(corners.items()):
        count = len(pos_idx)
        meshes.append(
            Mesh(
                positions=pos_arr[pos_idx],
                uvs=uv_arr[uv_idx],
                faces=np.arange(count, dtype=np.int64).reshape(-1, 3),
                texture_id=texture_id,
                name=f"{path.stem}:{texture_id}",
            )
        )
    return meshes


def _obj_index(index: int, count: int) -> int:
    resolved = index - 1 if index > 0 else count + index
    if not 0 <= resolved < count:
        raise IndexError(f"index {index} out of range (have {count})")
    return resolved


def camera_from_dict(data: Mapping[str, Any], base: Camera | None = None) -> Camera:
    base = base or Camera()
    known = {f for f in Camera.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise SceneError(f"unknown camera fields: {sorted(unknown)}")
    values = dict(data)
    if "position" in values:
        values["position"] = tuple(float(c) for c in values["position"])
    return replace(base, **values)


def load_scene(manifest_path: str | Path) -> tuple[Scene, Camera]:
    """Load a JSON scene manifest.

    Expected keys::

        {
          "meshes": [{"obj": "room.obj", "materials": {"floor": 1}}],
          "textures": {"1": "floor.ratexm"},
          "camera": {"position": [0, 1.6, 4], "yaw": 0, "fov_y": 60}
        }

    A single mesh may be given as ``"mesh": "room.obj"`` with a top-level
    ``"materials"`` table instead of the ``meshes`` list. Paths are
    relative to the manifest. ``camera`` is optional.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise SceneError(f"cannot read scene manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"{manifest_path}: invalid JSON: {exc}") from exc
    root = manifest_path.parent

    try:
        textures: dict[int, MipChain] = {}
        for key, rel in manifest["textures"].items():
            chain = read_chain(root / rel)
            textures[int(key)] = chain
        meshes: list[Mesh] = []
        entries = manifest.get("meshes")
        if entries is None:
            entries = [
                {"obj": manifest["mesh"], "materials": manifest.get("materials", {})}
            ]
        for entry in entries:
            materials = {str(k): int(v) for k, v in entry.get("materials", {}).items()}
            default = entry.get("texture_id")
            fallback = None if default is None else int(default)
            meshes += load_obj(root / entry["obj"], materials, fallback)
        camera = camera_from_dict(manifest.get("camera", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"{manifest_path}: invalid manifest: {exc}") from exc
    except (OSError, ContainerError) as exc:
        raise SceneError(f"{manifest_path}: cannot load texture: {exc}") from exc
    return Scene(meshes=tuple(meshes), textures=textures), camera


# ---------------------------------------------------------------------------
# Procedural demo scene
# ---------------------------------------------------------------------------


def procedural_texture(size: int, seed: int) -> npt.NDArray[np.uint8]:
    """Deterministic RGB texture: checker tiles, smooth colour waves, fine grain.

    The grain gives every MCU distinct content so random-access decoding
    is exercised everywhere.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    tiles = ((np.floor(xx * 8) + np.floor(yy * 8)) % 2)[..., None]
    phase = rng.uniform(0, 2 * np.pi, size=3)
    freq = rng.uniform(1.0, 3.0, size=3)
    waves = np.stack(
        [
            0.5 + 0.5 * np.sin(2 * np.pi * freq[c] * (xx + 0.7 * yy) + phase[c])
            for c in range(3)
        ],
        axis=-1,
    )
    base = rng.uniform(60, 200, size=3)
    grain = rng.normal(0.0, 12.0, size=(size, size, 1))
    image = base * (0.55 + 0.45 * tiles) * (0.6 + 0.4 * waves) + grain
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def _ring(
    footprint: list[tuple[float, float]],
    height: float,
    uv_repeat: tuple[float, float],
    texture_id: int,
    name: str,
) -> list[Mesh]:
    """Vertical quads along a closed ``(x, z)`` loop.

    Each quad faces the viewer that sees its base edge running left to
    right.
    """
    meshes: list[Mesh] = []
    closed = footprint[1:] + footprint[:1]
    for i, (a, b) in enumerate(zip(footprint, closed, strict=True)):
        corners = [
            (a[0], 0, a[1]),
            (b[0], 0, b[1]),
            (b[0], height, b[1]),
            (a[0], height, a[1]),
        ]
        meshes.append(quad_mesh(corners, uv_repeat, texture_id, f"{name}{i}"))
    return meshes


def demo_geometry() -> tuple[Mesh, ...]:
    """Room 12 m x 12 m x 4 m with four pillars; texture ids 0-3.

    The floor repeats its texture every metre, walls every two metres.
    """
    h, height = 6.0, 4.0
    meshes = [
        quad_mesh(
            [(-h, 0, h), (h, 0, h), (h, 0, -h), (-h, 0, -h)], (12.0, 12.0), 0, "floor"
        ),
        quad_mesh(
            [(-h, height, -h), (h, height, -h), (h, height, h), (-h, height, h)],
            (6.0, 6.0),
            3,
            "ceiling",
        ),
    ]
    meshes += _ring([(-h, -h), (h, -h), (h, h), (-h, h)], height, (6.0, 2.0), 1, "wall")
    r = 0.4
    for i, (cx, cz) in enumerate([(-3.0, -3.0), (3.0, -3.0), (-3.0, 3.0), (3.0, 3.0)]):
        square = [
            (cx - r, cz + r),
            (cx + r, cz + r),
            (cx + r, cz - r),
            (cx - r, cz - r),
        ]
        meshes += _ring(square, height, (1.0, 4.0), 2, f"pillar{i}.")
    return tuple(meshes)


def build_demo_scene(
    texture_size: int = 256,
    quality: int = 80,
    viewport: tuple[int, int] = (960, 540),
) -> tuple[Scene, Camera]:
    """Transcode four procedural textures and return the room plus a start camera.

    The camera stands near one wall at eye height looking across the room.
    """
    textures = {
        tid: build_mip_chain(procedural_texture(texture_size, seed=tid), quality, tid)
        for tid in range(4)
    }
    camera = Camera(
        position=(0.0, 1.6, 4.5),
        pitch=-10.0,
        fov_y=70.0,
        width=viewport[0],
        height=viewport[1],
    )
    return Scene(meshes=demo_geometry(), textures=textures), camera
