"""Shared builders for score sets, embeddings and meshes."""

from typing import Sequence

import numpy as np
import pytest

from face_fusion_eval.scores import Label, ScoreRecord, ScoreSet

CUBE_OBJ = """\
# unit cube, 8 vertices, 6 quads
v -0.5 -0.5 -0.5
v  0.5 -0.5 -0.5
v  0.5  0.5 -0.5
v -0.5  0.5 -0.5
v -0.5 -0.5  0.5
v  0.5 -0.5  0.5
v  0.5  0.5  0.5
v -0.5  0.5  0.5
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


def make_score_set(
    system_id: str,
    genuine: Sequence[float],
    impostor: Sequence[float],
    setting_id: str = "cam1_d1",
) -> ScoreSet:
    """Build a ScoreSet whose trial keys depend only on the trial index.

    Two sets built with the same lengths share every key, so they align.
    """
    records = []
    for i, score in enumerate(genuine):
        subject = f"s{i:04d}"
        records.append(
            ScoreRecord(system_id, setting_id, subject, subject, "p0", Label.GENUINE, score)
        )
    for i, score in enumerate(impostor):
        records.append(
            ScoreRecord(
                system_id, setting_id, f"r{i:04d}", f"q{i:04d}", "p0", Label.IMPOSTOR, score
            )
        )
    return ScoreSet(records, system_id=system_id)


def uv_sphere(n_lat: int = 12, n_lon: int = 16, nose: float = 0.0) -> str:
    """OBJ text of a UV sphere, mirror-symmetric about the x = 0 plane.

    ``n_lon`` must be even so longitudes pair up across the plane. ``nose``
    pushes the vertex closest to +z outwards to break front/back symmetry.
    """
    lines = ["v 0 1 0"]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            x = np.sin(theta) * np.sin(phi)
            y = np.cos(theta)
            z = np.sin(theta) * np.cos(phi)
            if nose and j == 0 and i == n_lat // 2:
                z *= 1.0 + nose
            lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    lines.append("v 0 -1 0")
    bottom = 1 + (n_lat - 1) * n_lon + 1

    def ring(i: int, j: int) -> int:
        return 2 + (i - 1) * n_lon + (j % n_lon)

    for j in range(n_lon):
        lines.append(f"f 1 {ring(1, j + 1)} {ring(1, j)}")
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            lines.append(f"f {ring(i, j)} {ring(i, j + 1)} {ring(i + 1, j + 1)} {ring(i + 1, j)}")
    for j in range(n_lon):
        lines.append(f"f {bottom} {ring(n_lat - 1, j)} {ring(n_lat - 1, j + 1)}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def cube_obj() -> str:
    return CUBE_OBJ


@pytest.fixture
def separated_set() -> ScoreSet:
    """Every genuine score above every impostor score."""
    return make_score_set("sysA", [0.9, 0.8, 0.85, 0.95], [0.1, 0.2, 0.15, 0.3])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
