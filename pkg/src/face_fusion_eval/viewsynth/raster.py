"""Z-buffered software rasterizer and gallery enlargement.

Pixels are sampled at their centres (no anti-aliasing) with a top-left origin
and +y down. Triangles are drawn in index order and a pixel only changes owner
when a strictly nearer surface covers it, so output is bit-identical for any
thread or tile count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..errors import ValidationError
from ..formats import atomic_path, write_csv
from .camera import PERSPECTIVE, Camera, Pose, PoseGridParams, pose_grid, project_vertices
from .camera import rotate_vertices
from .mesh import Mesh, normalize_mesh

logger = logging.getLogger(__name__)

FLAT = "flat"
LAMBERT = "lambert"
DEFAULT_ALBEDO = 0.8
MANIFEST_HEADER = ["pose_index", "azimuth_deg", "elevation_deg", "filename"]


@dataclass(frozen=True)
class ViewImage:
    """A rendered view of the template.

    Attributes:
        pose: Pose the view was rendered at.
        pixels: (height, width) grayscale or (height, width, 3) RGB in [0, 1].
        depth: (height, width) camera depth, +inf where no surface was drawn.
    """

    pose: Pose
    pixels: np.ndarray
    depth: Optional[np.ndarray] = None

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def silhouette(self) -> np.ndarray:
        if self.depth is None:
            return np.any(self.pixels.reshape(self.height, self.width, -1) > 0, axis=2)
        return np.isfinite(self.depth)

    @property
    def filename(self) -> str:
        azimuth = _angle_tag(self.pose.azimuth_deg)
        elevation = _angle_tag(self.pose.elevation_deg)
        return f"view_az{azimuth}_el{elevation}.png"

    def to_uint8(self) -> np.ndarray:
        return np.round(np.clip(self.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def _angle_tag(value: float) -> str:
    if float(value).is_integer():
        return f"{int(value):+03d}"
    return f"{value:+.1f}".replace(".", "p")


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _triangle_shading(
    rotated: np.ndarray, triangles: np.ndarray, camera: Camera, shading: str
) -> np.ndarray:
    """Per-triangle light factor for a headlight at the camera position."""
    if shading == FLAT:
        return np.ones(triangles.shape[0])
    v0 = rotated[triangles[:, 0]]
    v1 = rotated[triangles[:, 1]]
    v2 = rotated[triangles[:, 2]]
    normals = np.cross(v1 - v0, v2 - v0)
    if camera.projection == PERSPECTIVE:
        eye = np.array([0.0, 0.0, camera.subject_distance])
        light = eye - (v0 + v1 + v2) / 3.0
    else:
        light = np.tile([0.0, 0.0, 1.0], (triangles.shape[0], 1))
    norms = np.linalg.norm(normals, axis=1) * np.linalg.norm(light, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.abs(np.sum(normals * light, axis=1)) / norms
    return np.nan_to_num(factor, nan=0.0)


def _draw_band(
    rows: Tuple[int, int],
    points: np.ndarray,
    depth: np.ndarray,
    triangles: np.ndarray,
    bounds: np.ndarray,
    vertex_colors: np.ndarray,
    light: np.ndarray,
    perspective: bool,
    width: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Rasterize every triangle into the image rows ``[start, stop)``."""
    start, stop = rows
    channels = vertex_colors.shape[1]
    zbuffer = np.full((stop - start, width), np.inf)
    color = np.zeros((stop - start, width, channels))

    overlapping = np.flatnonzero((bounds[:, 2] <= stop - 1) & (bounds[:, 3] >= start))
    for t in overlapping:
        x0, x1, y0, y1 = bounds[t]
        x0, x1 = max(x0, 0), min(x1, width - 1)
        y0, y1 = max(y0, start), min(y1, stop - 1)
        if x0 > x1 or y0 > y1:
            continue
        i0, i1, i2 = triangles[t]
        (ax, ay), (bx, by), (cx, cy) = points[i0], points[i1], points[i2]
        area = _edge(ax, ay, bx, by, cx, cy)
        if area == 0.0:
            continue

        px = np.arange(x0, x1 + 1, dtype=np.float64)[np.newaxis, :] + 0.5
        py = np.arange(y0, y1 + 1, dtype=np.float64)[:, np.newaxis] + 0.5
        w0 = _edge(bx, by, cx, cy, px, py) / area
        w1 = _edge(cx, cy, ax, ay, px, py) / area
        w2 = _edge(ax, ay, bx, by, px, py) / area
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue

        d0, d1, d2 = depth[i0], depth[i1], depth[i2]
        if perspective:
            inverse = w0 / d0 + w1 / d1 + w2 / d2
            z = 1.0 / inverse
            b0, b1, b2 = (w0 / d0) * z, (w1 / d1) * z, (w2 / d2) * z
        else:
            z = w0 * d0 + w1 * d1 + w2 * d2
            b0, b1, b2 = w0, w1, w2

        region = (slice(y0 - start, y1 - start + 1), slice(x0, x1 + 1))
        nearer = inside & (z < zbuffer[region])
        if not nearer.any():
            continue
        zbuffer[region][nearer] = z[nearer]
        shaded = (
            b0[..., np.newaxis] * vertex_colors[i0]
            + b1[..., np.newaxis] * vertex_colors[i1]
            + b2[..., np.newaxis] * vertex_colors[i2]
        ) * light[t]
        color[region][nearer] = shaded[nearer]
    return zbuffer, color


def rasterize(
    mesh: Mesh,
    pose: Pose,
    camera: Camera,
    shading: str = LAMBERT,
    tiles: int = 1,
) -> ViewImage:
    """Render a normalised mesh at one pose.

    Args:
        mesh: Mesh already passed through ``normalize_mesh``.
        pose: View angle.
        camera: Projection and image size.
        shading: ``"flat"`` (unlit albedo) or ``"lambert"`` (headlight).
        tiles: Number of horizontal bands rendered concurrently.

    Returns:
        ViewImage with a grayscale image (uniform albedo) or an RGB image when
        the mesh has vertex colours; background pixels are 0.
    """
    if shading not in (FLAT, LAMBERT):
        raise ValidationError(f"shading must be {FLAT!r} or {LAMBERT!r}, got {shading!r}")
    if tiles < 1:
        raise ValidationError(f"tiles must be at least 1, got {tiles}")

    width, height = camera.width, camera.height
    projection = project_vertices(mesh, pose, camera)
    triangles = mesh.triangles
    visible = ~np.any(projection.behind[triangles], axis=1)
    if not visible.all():
        logger.warning(
            "Skipping %d triangles behind the camera at pose %s", int((~visible).sum()), pose
        )
        triangles = triangles[visible]

    if mesh.colors is not None:
        vertex_colors = mesh.colors
    else:
        vertex_colors = np.full((mesh.n_vertices, 1), DEFAULT_ALBEDO)
    light = _triangle_shading(rotate_vertices(mesh.vertices, pose), triangles, camera, shading)

    points = projection.points
    if triangles.shape[0]:
        corners = points[triangles]
        bounds = np.stack(
            [
                np.ceil(corners[:, :, 0].min(axis=1) - 0.5),
                np.floor(corners[:, :, 0].max(axis=1) - 0.5),
                np.ceil(corners[:, :, 1].min(axis=1) - 0.5),
                np.floor(corners[:, :, 1].max(axis=1) - 0.5),
            ],
            axis=1,
        )
        # keep spans representable; _draw_band clips them to the band
        bounds = np.clip(bounds, -1, max(width, height)).astype(np.int64)
    else:
        bounds = np.zeros((0, 4), dtype=np.int64)

    edges = np.linspace(0, height, min(tiles, height) + 1).round().astype(int)
    bands = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    perspective = camera.projection == PERSPECTIVE

    def draw(rows):
        return _draw_band(
            rows,
            points,
            projection.depth,
            triangles,
            bounds,
            vertex_colors,
            light,
            perspective,
            width,
        )

    if len(bands) == 1:
        results = [draw(bands[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as executor:
            results = list(executor.map(draw, bands))

    zbuffer = np.vstack([z for z, _ in results])
    color = np.vstack([c for _, c in results])
    pixels = color[:, :, 0] if color.shape[2] == 1 else color
    return ViewImage(pose=pose, pixels=np.clip(pixels, 0.0, 1.0), depth=zbuffer)


def enlarge_gallery(
    mesh: Mesh,
    params: PoseGridParams = PoseGridParams(),
    camera: Camera = Camera(),
    shading: str = LAMBERT,
    threads: int = 1,
) -> List[ViewImage]:
    """Render the template at every pose of the enlargement grid.

    Args:
        mesh: Reconstructed face mesh; it is normalised before rendering.
        params: Pose grid bounds and step.
        camera: Projection and image size (128x128 by default).
        shading: Shading mode passed to ``rasterize``.
        threads: Number of poses rendered concurrently.

    Returns:
        One ViewImage per grid pose, in grid order.
    """
    normalized = normalize_mesh(mesh)
    poses = pose_grid(params)
    logger.info("Rendering %d views at %dx%d", len(poses), camera.width, camera.height)

    def render(pose: Pose) -> ViewImage:
        return rasterize(normalized, pose, camera, shading)

    if threads <= 1:
        return [render(pose) for pose in poses]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(render, poses))


def write_gallery(views: Sequence[ViewImage], out_dir: Union[str, Path]) -> Path:
    """Write each view as an 8-bit PNG plus a manifest CSV.

    Returns:
        Path of the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, view in enumerate(views):
        image = Image.fromarray(view.to_uint8())
        with atomic_path(out_dir / view.filename) as temp:
            image.save(temp, format="PNG")
        rows.append(
            [
                str(index),
                format(view.pose.azimuth_deg, "g"),
                format(view.pose.elevation_deg, "g"),
                view.filename,
            ]
        )
    manifest = write_csv(out_dir / "manifest.csv", MANIFEST_HEADER, rows)
    logger.info("Wrote %d views to %s", len(views), out_dir)
    return manifest

