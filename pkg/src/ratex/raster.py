"""Software rasterization of a :class:`~ratex.scene.Scene` into a G-buffer.

Triangles are transformed to clip space, clipped against the near and
far planes, culled when back-facing and scan-converted over their
screen-space bounding box with pixel centres at ``(x + 0.5, y + 0.5)``.
Texture coordinates are interpolated perspective-correctly; their
screen-space derivatives come from the triangle's projective mapping,
not from pixel-quad differences, so every pixel's mip level is
independent of rasterization order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ratex.scene import Camera, Mesh, Scene
from ratex.types import MIP_LEVELS

_AREA_EPSILON = 1e-12
_LOG_EPSILON = 1e-9

# Clip-space half-spaces as (sign of z) with ``w + sign * z >= 0``.
_CLIP_PLANES = (1.0, -1.0)


@dataclass(frozen=True, slots=True, eq=False)
class GBuffer:
    """Per-pixel texture attributes of one view.

    Arrays are ``(height, width)``. Pixels with ``valid`` false hold zeros
    in every other array.

    Parameters
    ----------
    u, v:
        Texture coordinates, unbounded (addressing wraps).
    texture_id:
        Texture sampled by the visible surface.
    mip_level:
        Selected level in ``0..7`` (before clamping to the chain length).
    depth:
        ``1 / w`` of the visible surface; larger is nearer.
    """

    u: npt.NDArray[np.float64]
    v: npt.NDArray[np.float64]
    texture_id: npt.NDArray[np.int32]
    mip_level: npt.NDArray[np.int8]
    valid: npt.NDArray[np.bool_]
    depth: npt.NDArray[np.float64]

    @classmethod
    def empty(cls, width: int, height: int) -> GBuffer:
        shape = (height, width)
        return cls(
            u=np.zeros(shape),
            v=np.zeros(shape),
            texture_id=np.zeros(shape, dtype=np.int32),
            mip_level=np.zeros(shape, dtype=np.int8),
            valid=np.zeros(shape, dtype=np.bool_),
            depth=np.zeros(shape),
        )

    @property
    def width(self) -> int:
        return int(self.valid.shape[1])

    @property
    def height(self) -> int:
        return int(self.valid.shape[0])

    @property
    def covered(self) -> int:
        return int(np.count_nonzero(self.valid))

    def digest(self) -> str:
        """SHA-256 over the readable contents, for determinism checks."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.valid).tobytes())
        for array in (self.u, self.v, self.texture_id, self.mip_level):
            h.update(np.ascontiguousarray(array[self.valid]).tobytes())
        return h.hexdigest()


def select_mip_level(footprint: npt.NDArray[np.float64]) -> npt.NDArray[np.int8]:
    """Nearest-lower level for a texel-per-pixel footprint, clamped to ``0..7``.

    ``floor(log2(footprint))``; footprints below one texel map to level 0.
    """
    safe = np.maximum(footprint, 1.0)
    level = np.floor(np.log2(safe) + _LOG_EPSILON)
    return np.clip(level, 0, MIP_LEVELS - 1).astype(np.int8)


def _clip_polygon(
    vertices: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Sutherland-Hodgman clip of ``(n, 6)`` rows ``(x, y, z, w, u, v)``."""
    poly = vertices
    for sign in _CLIP_PLANES:
        if len(poly) == 0:
            break
        dist = poly[:, 3] + sign * poly[:, 2]
        if np.all(dist >= 0):
            continue
        out: list[npt.NDArray[np.float64]] = []
        n = len(poly)
        for i in range(n):
            a, b = poly[i], poly[(i + 1) % n]
            da, db = dist[i], dist[(i + 1) % n]
            if da >= 0:
                out.append(a)
            if (da >= 0) != (db >= 0):
                t = da / (da - db)
                out.append(a + t * (b - a))
        poly = np.asarray(out).reshape(-1, 6)
    return poly


def _draw_triangle(
    gbuffer: GBuffer,
    screen: npt.NDArray[np.float64],
    attrs: npt.NDArray[np.float64],
    texture_id: int,
    texture_size: tuple[int, int],
    enable_mipmaps: bool,
) -> None:
    """Scan-convert one screen-space triangle.

    *screen* is ``(3, 2)`` pixel coordinates; *attrs* is ``(3, 3)`` rows of
    ``(1/w, u/w, v/w)``.
    """
    (x0, y0), (x1, y1), (x2, y2) = screen
    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    # Counter-clockwise in NDC is clockwise with y pointing down.
    if area > -_AREA_EPSILON:
        return

    height, width = gbuffer.valid.shape
    xmin = max(int(np.ceil(screen[:, 0].min() - 0.5)), 0)
    xmax = min(int(np.floor(screen[:, 0].max() - 0.5)), width - 1)
    ymin = max(int(np.ceil(screen[:, 1].min() - 0.5)), 0)
    ymax = min(int(np.floor(screen[:, 1].max() - 0.5)), height - 1)
    if xmin > xmax or ymin > ymax:
        return

    ys, xs = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
    px = xs + 0.5
    py = ys + 0.5
    e0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    e1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
    e2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    inside = (e0 <= 0) & (e1 <= 0) & (e2 <= 0)
    if not inside.any():
        return

    # Plane coefficients (a, b, c) of each attribute over screen space.
    system = np.column_stack([screen, np.ones(3)])
    planes = np.linalg.solve(system, attrs)
    px, py = px[inside], py[inside]
    values = px[:, None] * planes[0] + py[:, None] * planes[1] + planes[2]
    q, pu, pv = values[:, 0], values[:, 1], values[:, 2]

    rows, cols = ys[inside], xs[inside]
    nearer = q > gbuffer.depth[rows, cols]
    if not nearer.any():
        return
    rows, cols = rows[nearer], cols[nearer]
    q, pu, pv = q[nearer], pu[nearer], pv[nearer]

    u = pu / q
    v = pv / q
    if enable_mipmaps:
        tex_w, tex_h = texture_size
        q2 = q * q
        (aq, au, av), (bq, bu, bv) = planes[0], planes[1]
        dudx = (au * q - pu * aq) / q2 * tex_w
        dvdx = (av * q - pv * aq) / q2 * tex_h
        dudy = (bu * q - pu * bq) / q2 * tex_w
        dvdy = (bv * q - pv * bq) / q2 * tex_h
        footprint = np.maximum(np.hypot(dudx, dvdx), np.hypot(dudy, dvdy))
        mip = select_mip_level(footprint)
    else:
        mip = np.zeros(len(q), dtype=np.int8)

    gbuffer.u[rows, cols] = u
    gbuffer.v[rows, cols] = v
    gbuffer.texture_id[rows, cols] = texture_id
    gbuffer.mip_level[rows, cols] = mip
    gbuffer.valid[rows, cols] = True
    gbuffer.depth[rows, cols] = q


def _draw_mesh(
    gbuffer: GBuffer,
    mesh: Mesh,
    view_projection: npt.NDArray[np.float64],
    texture_size: tuple[int, int],
    enable_mipmaps: bool,
) -> None:
    height, width = gbuffer.valid.shape
    homogeneous = np.column_stack([mesh.positions, np.ones(len(mesh.positions))])
    clip = homogeneous @ view_projection.T
    rows = np.column_stack([clip, mesh.uvs])

    for face in mesh.faces:
        poly = _clip_polygon(rows[face])
        if len(poly) < 3:
            continue
        w = poly[:, 3]
        ndc = poly[:, :2] / w[:, None]
        screen = np.column_stack(
            [(ndc[:, 0] + 1.0) * 0.5 * width, (1.0 - ndc[:, 1]) * 0.5 * height]
        )
        inv_w = 1.0 / w
        attrs = np.column_stack([inv_w, poly[:, 4] * inv_w, poly[:, 5] * inv_w])
        for k in range(1, len(poly) - 1):
            tri = [0, k, k + 1]
            _draw_triangle(
                gbuffer,
                screen[tri],
                attrs[tri],
                mesh.texture_id,
                texture_size,
                enable_mipmaps,
            )


def rasterize_gbuffer(
    scene: Scene, camera: Camera, *, enable_mipmaps: bool = True
) -> GBuffer:
    """Draw every mesh of *scene* as seen from *camera*.

    The nearest surface wins (larger ``1/w``); on exact depth ties the
    earlier triangle in mesh order stays. Degenerate and back-facing
    triangles are skipped.

    Parameters
    ----------
    enable_mipmaps:
        When false, every pixel gets mip level 0.
    """
    gbuffer = GBuffer.empty(camera.width, camera.height)
    view_projection = camera.view_projection()
    for mesh in scene.meshes:
        level0 = scene.textures[mesh.texture_id].levels[0]
        _draw_mesh(
            gbuffer,
            mesh,
            view_projection,
            (level0.width, level0.height),
            enable_mipmaps,
        )
    return gbuffer
