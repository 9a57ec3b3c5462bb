"""Tests for OBJ loading, the pose grid, projection and rasterisation."""

import csv

import numpy as np
import pytest
from conftest import uv_sphere
from PIL import Image

from face_fusion_eval.errors import MeshError, ValidationError
from face_fusion_eval.viewsynth import (
    FLAT,
    ORTHOGRAPHIC,
    Camera,
    Mesh,
    Pose,
    PoseGridParams,
    enlarge_gallery,
    load_mesh,
    normalize_mesh,
    pose_grid,
    project_vertices,
    rasterize,
    rotation_matrix,
    write_gallery,
)

TRIANGLE = "v 0 0 0\nv 1 0 0\nv 0 1 0\n"


def test_default_pose_grid():
    """Test the 7x7 default grid and its elevation-major order."""
    grid = pose_grid(PoseGridParams())
    assert len(grid) == 49
    assert grid[0] == Pose(-30.0, -30.0)
    assert grid[6] == Pose(30.0, -30.0)
    assert grid[24] == Pose(0.0, 0.0)
    assert grid[-1] == Pose(30.0, 30.0)
    assert len(set(grid)) == 49


def test_pose_grid_matches_nested_loops(rng):
    """Test random grid bounds against an integer nested loop."""
    for _ in range(100):
        max_az = int(rng.integers(0, 61))
        max_el = int(rng.integers(0, 61))
        offset = int(rng.integers(1, 21))
        expected = [
            Pose(float(a), float(e))
            for e in range(-max_el, max_el + 1, offset)
            for a in range(-max_az, max_az + 1, offset)
        ]
        assert pose_grid(PoseGridParams(max_az, max_el, offset)) == expected


@pytest.mark.parametrize(
    "bound, offset, count",
    [(0.3, 0.1, 7), (1.0, 0.2, 11), (7.5, 2.5, 7), (0.7, 0.3, 5), (0.0, 0.1, 1)],
)
def test_pose_grid_fractional_offset(bound, offset, count):
    """Test that fractional steps keep the inclusive bounds and never drift past them."""
    grid = pose_grid(PoseGridParams(bound, 0.0, offset))
    azimuths = [pose.azimuth_deg for pose in grid]
    assert len(grid) == count
    assert azimuths[0] == -bound
    assert max(azimuths) <= bound
    np.testing.assert_allclose(azimuths, [-bound + k * offset for k in range(count)], atol=1e-12)
    if count > 1 and (2 * bound / offset) == pytest.approx(count - 1):
        assert azimuths[-1] == pytest.approx(bound, abs=1e-12)


def test_rotation_composes_azimuth_then_elevation(rng):
    """Test that (a, e) equals rotating by (a, 0) and then by (0, e)."""
    for _ in range(20):
        a, e = (float(v) for v in rng.uniform(-90, 90, size=2))
        composed = rotation_matrix(Pose(0.0, e)) @ rotation_matrix(Pose(a, 0.0))
        np.testing.assert_allclose(rotation_matrix(Pose(a, e)), composed, atol=1e-12)


def test_pose_grid_rejects_bad_params():
    """Test offset and bound validation."""
    with pytest.raises(ValidationError, match="offset"):
        PoseGridParams(30, 30, 0)
    with pytest.raises(ValidationError):
        PoseGridParams(-5, 30, 10)


def test_rotation_matrix_is_orthonormal(rng):
    """Test R R^T = I and det R = 1 for random poses."""
    for _ in range(10):
        pose = Pose(float(rng.uniform(-90, 90)), float(rng.uniform(-90, 90)))
        r = rotation_matrix(pose)
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)


def test_load_mesh_triangulates_and_resolves_indices():
    """Test quads, negative indices and v/vt/vn tokens."""
    mesh = load_mesh(TRIANGLE + "v 1 1 0\nf -4 -3 -1 -2\nf 1/1/1 2//1 3\n")
    assert mesh.n_vertices == 4
    assert mesh.triangles.tolist() == [[0, 1, 3], [0, 3, 2], [0, 1, 2]]
    assert mesh.colors is None


def test_load_mesh_vertex_colors():
    """Test that r g b after the coordinates become vertex colours."""
    mesh = load_mesh("v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n")
    np.testing.assert_array_equal(mesh.colors, np.eye(3))


@pytest.mark.parametrize(
    "text,line,message",
    [
        (TRIANGLE + "f 0 1 2\n", 4, "index 0"),
        (TRIANGLE + "f 1 2 9\n", 4, "out of range"),
        ("v 0 0 0\nv 1 x 0\n", 2, "malformed vertex"),
        (TRIANGLE + "\nf 1 2\n", 5, "at least 3"),
        (TRIANGLE + "f 1 2 2\n", 4, "repeats"),
    ],
)
def test_load_mesh_errors_carry_line(text, line, message):
    """Test that malformed records name their line."""
    with pytest.raises(MeshError, match=message) as excinfo:
        load_mesh(text)
    assert excinfo.value.line == line


def test_load_mesh_without_faces():
    """Test that a point cloud is rejected."""
    with pytest.raises(MeshError, match="no faces"):
        load_mesh(TRIANGLE)


def test_normalize_mesh(cube_obj):
    """Test centring and unit bounding radius, independent of position and scale."""
    cube = load_mesh(cube_obj)
    moved = Mesh(cube.vertices * 3.0 + [5.0, -2.0, 1.0], cube.triangles)
    mesh = normalize_mesh(moved)
    np.testing.assert_allclose(mesh.vertices.mean(axis=0), 0.0, atol=1e-12)
    assert np.max(np.linalg.norm(mesh.vertices, axis=1)) == pytest.approx(1.0)
    np.testing.assert_allclose(mesh.vertices, normalize_mesh(cube).vertices, atol=1e-12)


def test_normalize_mesh_rejects_collapsed():
    """Test that coincident vertices cannot be normalised."""
    mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError, match="coincide"):
        normalize_mesh(mesh)


def test_projection_centres_origin():
    """Test that the origin lands on the image centre for both projections."""
    mesh = load_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 1 2 3\n")
    for projection in ("perspective", ORTHOGRAPHIC):
        camera = Camera(projection=projection, image_size=(64, 48))
        points = project_vertices(mesh, Pose(0.0, 0.0), camera).points
        np.testing.assert_allclose(points[0], [32.0, 24.0])
        assert points[1, 0] > 32.0
        assert points[2, 1] < 24.0


def test_orthographic_cube_fill(cube_obj):
    """Test the frontal cube silhouette against its analytic area."""
    camera = Camera(projection=ORTHOGRAPHIC)
    view = rasterize(normalize_mesh(load_mesh(cube_obj)), Pose(0.0, 0.0), camera, FLAT)
    side = 2.0 * (0.5 / np.sqrt(0.75)) * camera.focal_px / camera.subject_distance
    assert view.silhouette.sum() == pytest.approx(side**2, rel=0.02)
    assert view.pixels.shape == (128, 128)
    assert view.pixels[0, 0] == 0.0


def test_mirror_poses_render_mirror_images():
    """Test that +az and -az views of a mirror-symmetric head are mirror images."""
    mesh = normalize_mesh(load_mesh(uv_sphere(nose=0.3)))
    camera = Camera()
    left = rasterize(mesh, Pose(-30.0, 0.0), camera)
    right = rasterize(mesh, Pose(30.0, 0.0), camera)

    mismatch = np.mean(left.silhouette != right.silhouette[:, ::-1])
    assert mismatch < 0.01
    assert np.mean(np.abs(left.pixels - right.pixels[:, ::-1])) < 0.01
    assert np.mean(np.abs(left.pixels - right.pixels)) > np.mean(
        np.abs(left.pixels - right.pixels[:, ::-1])
    )


def test_rasterize_is_deterministic_across_tiles():
    """Test that band-parallel rendering is bit-identical to a single band."""
    mesh = normalize_mesh(load_mesh(uv_sphere(nose=0.3)))
    pose = Pose(20.0, -10.0)
    reference = rasterize(mesh, pose, Camera())
    for tiles in (2, 5, 8):
        view = rasterize(mesh, pose, Camera(), tiles=tiles)
        np.testing.assert_array_equal(view.pixels, reference.pixels)
        np.testing.assert_array_equal(view.depth, reference.depth)


def test_enlarge_gallery_thread_independent(cube_obj):
    """Test that the gallery is identical for 1, 2 and 8 threads."""
    mesh = load_mesh(cube_obj)
    params = PoseGridParams(20, 20, 10)
    camera = Camera(image_size=(32, 32))
    reference = enlarge_gallery(mesh, params, camera, threads=1)
    assert len(reference) == 25
    for threads in (2, 8):
        views = enlarge_gallery(mesh, params, camera, threads=threads)
        assert [v.pose for v in views] == [v.pose for v in reference]
        for a, b in zip(views, reference):
            np.testing.assert_array_equal(a.pixels, b.pixels)


def test_colored_mesh_renders_rgb():
    """Test that vertex colours produce an RGB image."""
    mesh = normalize_mesh(load_mesh("v -1 -1 0 1 0 0\nv 1 -1 0 1 0 0\nv 0 1 0 1 0 0\nf 1 2 3\n"))
    view = rasterize(mesh, Pose(0.0, 0.0), Camera(image_size=(32, 32)), FLAT)
    assert view.pixels.shape == (32, 32, 3)
    inside = view.silhouette
    assert inside.any()
    assert np.all(view.pixels[inside][:, 1:] == 0.0)


def test_write_gallery(cube_obj, tmp_path):
    """Test 49 PNGs plus a manifest in grid order."""
    views = enlarge_gallery(load_mesh(cube_obj), camera=Camera(image_size=(32, 32)), threads=4)
    manifest = write_gallery(views, tmp_path / "gallery")

    pngs = sorted((tmp_path / "gallery").glob("*.png"))
    assert len(pngs) == 49
    with open(manifest, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 49
    assert rows[0]["azimuth_deg"] == "-30"
    assert rows[0]["filename"] == "view_az-30_el-30.png"
    assert rows[24]["filename"] == "view_az+00_el+00.png"

    with Image.open(tmp_path / "gallery" / rows[24]["filename"]) as image:
        assert image.size == (32, 32)
        assert image.mode == "L"


@pytest.mark.parametrize("near_first", [True, False])
def test_nearer_triangle_owns_overlap(near_first):
    """Test that the triangle closer to the camera wins every contested pixel."""
    near = [[-0.5, -0.5, 0.2], [0.5, -0.5, 0.2], [0.0, 0.5, 0.2]]
    far = [[-0.5, 0.5, -0.2], [0.5, 0.5, -0.2], [0.0, -0.5, -0.2]]
    red, green = [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]
    camera = Camera(image_size=(64, 64))
    pose = Pose(0.0, 0.0)

    def render(vertices, colors):
        triangles = np.arange(len(vertices)).reshape(-1, 3)
        return rasterize(Mesh(np.array(vertices), triangles, np.array(colors)), pose, camera, FLAT)

    near_only = render(near, [red] * 3).silhouette
    far_only = render(far, [green] * 3).silhouette
    contested = near_only & far_only
    assert contested.sum() > 50

    if near_first:
        both = render(near + far, [red] * 3 + [green] * 3)
    else:
        both = render(far + near, [green] * 3 + [red] * 3)
    assert np.all(both.pixels[contested][:, 0] > 0.99)
    assert np.all(both.pixels[contested][:, 1] == 0.0)
    assert np.all(both.pixels[far_only & ~near_only][:, 1] > 0.99)


def test_silhouette_agrees_across_resolutions():
    """Test a 16x16 render against a block-downsampled 128x128 render."""
    mesh = normalize_mesh(load_mesh(uv_sphere(nose=0.3)))
    pose = Pose(20.0, 10.0)
    small = rasterize(mesh, pose, Camera(image_size=(16, 16))).silhouette
    large = rasterize(mesh, pose, Camera(image_size=(128, 128))).silhouette
    downsampled = large.reshape(16, 8, 16, 8).mean(axis=(1, 3)) >= 0.5
    assert np.mean(small == downsampled) >= 0.9


def test_load_mesh_rejects_non_utf8_bytes():
    """Test that undecodable OBJ bytes raise MeshError."""
    with pytest.raises(MeshError, match="UTF-8"):
        load_mesh(b"v 0 0 0\n# caf\xe9\n")
