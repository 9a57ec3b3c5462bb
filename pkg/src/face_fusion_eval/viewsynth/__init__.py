"""Multi-view synthesis of reconstructed 3D face templates for gallery enlargement."""

from .camera import (
    ORTHOGRAPHIC,
    PERSPECTIVE,
    Camera,
    Pose,
    PoseGridParams,
    Projection,
    pose_grid,
    project_vertices,
    rotate_vertices,
    rotation_matrix,
)
from .mesh import Mesh, load_mesh, normalize_mesh
from .raster import FLAT, LAMBERT, ViewImage, enlarge_gallery, rasterize, write_gallery

__all__ = [
    "ORTHOGRAPHIC",
    "PERSPECTIVE",
    "Camera",
    "Pose",
    "PoseGridParams",
    "Projection",
    "pose_grid",
    "project_vertices",
    "rotate_vertices",
    "rotation_matrix",
    "Mesh",
    "load_mesh",
    "normalize_mesh",
    "FLAT",
    "LAMBERT",
    "ViewImage",
    "enlarge_gallery",
    "rasterize",
    "write_gallery",
]
