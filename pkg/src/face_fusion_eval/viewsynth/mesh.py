"""Triangle meshes of reconstructed faces and their Wavefront OBJ loader."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from ..errors import MeshError

logger = logging.getLogger(__name__)

# Records that carry no geometry this loader uses
_SILENT_RECORDS = {"vn", "vt", "vp", "o", "g", "s", "l", "p"}
_WARN_RECORDS = {"usemtl", "mtllib"}


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with optional per-vertex RGB colour in [0, 1].

    Attributes:
        vertices: Float array of shape (V, 3).
        triangles: Integer array of shape (T, 3), zero-based vertex indices.
        colors: Optional float array of shape (V, 3).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        triangles = np.asarray(self.triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must have shape (V, 3), got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("vertices must be finite")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] < 1:
            raise MeshError("a mesh needs at least one triangle of shape (T, 3)")
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise MeshError(f"triangle index out of range for {vertices.shape[0]} vertices")
        degenerate = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 0] == triangles[:, 2])
        )
        if np.any(degenerate):
            raise MeshError(f"triangle {int(np.flatnonzero(degenerate)[0])} repeats a vertex")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

        if self.colors is not None:
            colors = np.asarray(self.colors, dtype=np.float64)
            if colors.shape != vertices.shape:
                raise MeshError(f"colors must have shape {vertices.shape}, got {colors.shape}")
            if np.any(colors < 0.0) or np.any(colors > 1.0):
                raise MeshError("vertex colors must lie in [0, 1]")
            object.__setattr__(self, "colors", colors)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])


def _resolve_index(token: str, n_vertices: int, line_number: int) -> int:
    head = token.split("/", 1)[0]
    try:
        index = int(head)
    except ValueError:
        raise MeshError(f"malformed face index {token!r}", line=line_number)
    if index == 0:
        raise MeshError("face index 0 is invalid (OBJ indices are 1-based)", line=line_number)
    resolved = index - 1 if index > 0 else n_vertices + index
    if not (0 <= resolved < n_vertices):
        raise MeshError(
            f"face index {index} out of range for {n_vertices} vertices", line=line_number
        )
    return resolved


def load_mesh(obj_bytes: Union[bytes, str]) -> Mesh:
    """Parse Wavefront OBJ text into a Mesh.

    Supports ``v`` (with optional ``r g b`` colour), ``f`` (polygons are
    fan-triangulated, ``v/vt/vn`` forms and negative indices accepted).
    Normals, texture coordinates and grouping records are ignored; material
    records are ignored with a warning.

    Args:
        obj_bytes: OBJ file content.

    Returns:
        The parsed Mesh.

    Raises:
        MeshError: On a malformed record (with its line number), an out-of-range
            index, or a file without faces.
    """
    if isinstance(obj_bytes, bytes):
        try:
            text = obj_bytes.decode("utf-8")
        except UnicodeDecodeError:
            raise MeshError("OBJ file is not valid UTF-8 text")
    else:
        text = obj_bytes
    vertices: List[List[float]] = []
    colors: List[Optional[List[float]]] = []
    triangles: List[List[int]] = []
    warned = set()

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *fields = line.split()

        if keyword == "v":
            if len(fields) not in (3, 4, 6):
                raise MeshError(
                    f"vertex record needs 3 coordinates, got {fields}", line=line_number
                )
            try:
                values = [float(field) for field in fields]
            except ValueError:
                raise MeshError(f"malformed vertex record {line!r}", line=line_number)
            vertices.append(values[:3])
            colors.append(values[-3:] if len(values) >= 6 else None)
        elif keyword == "f":
            if len(fields) < 3:
                raise MeshError("face record needs at least 3 vertices", line=line_number)
            polygon = [_resolve_index(field, len(vertices), line_number) for field in fields]
            if len(set(polygon)) != len(polygon):
                raise MeshError("face repeats a vertex", line=line_number)
            for i in range(1, len(polygon) - 1):
                triangles.append([polygon[0], polygon[i], polygon[i + 1]])
        elif keyword in _WARN_RECORDS:
            if keyword not in warned:
                logger.warning("Ignoring %s records (materials are not supported)", keyword)
                warned.add(keyword)
        elif keyword not in _SILENT_RECORDS and keyword not in warned:
            logger.warning("Ignoring unsupported OBJ record %r (line %d)", keyword, line_number)
            warned.add(keyword)

    if not triangles:
        raise MeshError("OBJ contains no faces")

    vertex_colors = None
    if colors and all(color is not None for color in colors):
        vertex_colors = np.array(colors, dtype=np.float64)
    elif any(color is not None for color in colors):
        logger.warning("Only some vertices carry colours; ignoring vertex colours")

    mesh = Mesh(np.array(vertices, dtype=np.float64), np.array(triangles), vertex_colors)
    logger.info("Loaded mesh with %d vertices, %d triangles", mesh.n_vertices, mesh.n_triangles)
    return mesh


def normalize_mesh(mesh: Mesh) -> Mesh:
    """Centre the vertex set on the origin and scale its bounding-sphere radius to 1."""
    centered = mesh.vertices - mesh.vertices.mean(axis=0)
    radius = float(np.max(np.linalg.norm(centered, axis=1)))
    if radius == 0.0:
        raise MeshError("cannot normalise a mesh whose vertices all coincide")
    return Mesh(centered / radius, mesh.triangles, mesh.colors)
