"""View poses, the gallery-enlargement pose grid and the projection camera."""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import ValidationError
from .mesh import Mesh

PERSPECTIVE = "perspective"
ORTHOGRAPHIC = "orthographic"
NEAR_PLANE = 1e-6


@dataclass(frozen=True)
class Pose:
    """View angle in degrees: azimuth about the vertical axis, then elevation."""

    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        for name in ("azimuth_deg", "elevation_deg"):
            value = getattr(self, name)
            if not math.isfinite(value) or not (-180.0 <= value <= 180.0):
                raise ValidationError(f"{name} must be finite and within [-180, 180], got {value}")


@dataclass(frozen=True)
class PoseGridParams:
    """Bounds and step of the gallery-enlargement grid, in degrees."""

    max_azimuth_deg: float = 30.0
    max_elevation_deg: float = 30.0
    offset_deg: float = 10.0

    def __post_init__(self):
        if not (self.offset_deg > 0):
            raise ValidationError(f"offset must be positive, got {self.offset_deg}")
        if self.max_azimuth_deg < 0 or self.max_elevation_deg < 0:
            raise ValidationError("maximum azimuth and elevation must be nonnegative")
        if self.max_azimuth_deg > 180 or self.max_elevation_deg > 180:
            raise ValidationError("maximum azimuth and elevation must not exceed 180 degrees")


@dataclass(frozen=True)
class Camera:
    """Pinhole or orthographic camera on the +z axis looking at the origin.

    ``subject_distance`` is measured in bounding radii of the normalised mesh.
    The orthographic camera uses the magnification the perspective camera has
    at the origin plane, so both frame the subject identically there.
    """

    projection: str = PERSPECTIVE
    fov_deg: float = 20.0
    subject_distance: float = 8.0
    image_size: Tuple[int, int] = (128, 128)

    def __post_init__(self):
        if self.projection not in (PERSPECTIVE, ORTHOGRAPHIC):
            raise ValidationError(
                f"projection must be {PERSPECTIVE!r} or {ORTHOGRAPHIC!r}, got {self.projection!r}"
            )
        if not (0.0 < self.fov_deg < 180.0):
            raise ValidationError(f"fov must lie in (0, 180) degrees, got {self.fov_deg}")
        if not (self.subject_distance > 1.0):
            raise ValidationError(
                f"subject distance must exceed one bounding radius, got {self.subject_distance}"
            )
        width, height = self.image_size
        if width < 16 or height < 16:
            raise ValidationError(f"image size must be at least 16x16, got {width}x{height}")

    @property
    def width(self) -> int:
        return int(self.image_size[0])

    @property
    def height(self) -> int:
        return int(self.image_size[1])

    @property
    def focal_px(self) -> float:
        return (min(self.width, self.height) / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)


@dataclass(frozen=True)
class Projection:
    """Vertices in pixel coordinates plus camera-space depth.

    ``behind`` flags vertices at or behind the camera plane (perspective only);
    their pixel coordinates are NaN.
    """

    points: np.ndarray
    depth: np.ndarray
    behind: np.ndarray


def pose_grid(params: PoseGridParams) -> List[Pose]:
    """Enumerate the gallery-enlargement poses.

    Elevation runs from -M to +M in steps of ``offset`` (outer loop) and
    azimuth from -N to +N (inner loop), bounds inclusive.
    """
    elevations = _grid_angles(params.max_elevation_deg, params.offset_deg)
    azimuths = _grid_angles(params.max_azimuth_deg, params.offset_deg)
    return [Pose(azimuth, elevation) for elevation in elevations for azimuth in azimuths]


def _grid_angles(bound: float, offset: float) -> List[float]:
    # integer steps; a relative tolerance keeps +bound when offset divides 2 * bound
    steps = math.floor(2.0 * bound / offset * (1.0 + 1e-12))
    return [float(min(-bound + k * offset, bound)) for k in range(steps + 1)]


def rotation_matrix(pose: Pose) -> np.ndarray:
    """Extrinsic rotation: azimuth about the y axis, then elevation about the x axis."""
    a = math.radians(pose.azimuth_deg)
    e = math.radians(pose.elevation_deg)
    azimuth = np.array(
        [[math.cos(a), 0.0, math.sin(a)], [0.0, 1.0, 0.0], [-math.sin(a), 0.0, math.cos(a)]]
    )
    elevation = np.array(
        [[1.0, 0.0, 0.0], [0.0, math.cos(e), -math.sin(e)], [0.0, math.sin(e), math.cos(e)]]
    )
    return elevation @ azimuth


def rotate_vertices(vertices: np.ndarray, pose: Pose) -> np.ndarray:
    return vertices @ rotation_matrix(pose).T


def project_vertices(mesh: Mesh, pose: Pose, camera: Camera) -> Projection:
    """Rotate a normalised mesh to ``pose`` and project it to pixel coordinates.

    The image centre is (width / 2, height / 2), +x right and +y down.
    """
    rotated = rotate_vertices(mesh.vertices, pose)
    depth = camera.subject_distance - rotated[:, 2]
    focal = camera.focal_px

    if camera.projection == PERSPECTIVE:
        behind = depth <= NEAR_PLANE
        safe_depth = np.where(behind, np.nan, depth)
        scale = focal / safe_depth
    else:
        behind = np.zeros(depth.shape, dtype=bool)
        scale = np.full(depth.shape, focal / camera.subject_distance)

    points = np.empty((rotated.shape[0], 2), dtype=np.float64)
    points[:, 0] = camera.width / 2.0 + rotated[:, 0] * scale
    points[:, 1] = camera.height / 2.0 - rotated[:, 1] * scale
    return Projection(points=points, depth=depth, behind=behind)
