"""Tests for score and embedding file formats."""

import struct

import numpy as np
import pytest
from conftest import make_score_set

from face_fusion_eval.errors import FormatError, ValidationError
from face_fusion_eval.formats import (
    BINARY_MAGIC,
    SCORE_HEADER,
    atomic_write,
    format_real,
    read_embeddings,
    read_scores,
    write_embeddings,
    write_embeddings_binary,
    write_scores,
)
from face_fusion_eval.scores import Embedding


def test_score_file_round_trip(tmp_path):
    """Test that a written score file reads back and rewrites byte-identically."""
    score_set = make_score_set("sysA", [0.912345678901, 0.5], [0.123456789012, 1e-7])
    first = write_scores(tmp_path / "a.csv", score_set)
    loaded = read_scores(first)
    second = write_scores(tmp_path / "b.csv", loaded)
    assert first.read_bytes() == second.read_bytes()
    assert len(loaded) == 4
    assert loaded.system_id == "sysA"


def test_score_file_header(tmp_path):
    """Test the exact header line."""
    path = write_scores(tmp_path / "s.csv", make_score_set("sysA", [0.9], [0.1]))
    assert path.read_text().splitlines()[0] == ",".join(SCORE_HEADER)


def test_read_scores_reports_line_of_bad_score(tmp_path):
    """Test that an out-of-range score names its line."""
    path = tmp_path / "bad.csv"
    path.write_text(
        ",".join(SCORE_HEADER)
        + "\nsys,cam1_d1,a,a,p0,genuine,0.5\nsys,cam1_d1,a,b,p0,impostor,1.5\n"
    )
    with pytest.raises(FormatError) as excinfo:
        read_scores(path)
    assert excinfo.value.line == 3
    assert f"{path}:3:" in str(excinfo.value)


def test_read_scores_rejects_contradicting_label(tmp_path):
    """Test that a genuine label on different subjects is rejected."""
    path = tmp_path / "bad.csv"
    path.write_text(",".join(SCORE_HEADER) + "\nsys,cam1_d1,a,b,p0,genuine,0.5\n")
    with pytest.raises(FormatError, match="contradicts"):
        read_scores(path)


def test_read_scores_rejects_bad_header(tmp_path):
    """Test header validation."""
    path = tmp_path / "bad.csv"
    path.write_text("system,score\nsys,0.5\n")
    with pytest.raises(FormatError, match="expected header"):
        read_scores(path)


def test_read_scores_missing_file(tmp_path):
    """Test that a missing file is a validation error naming the file."""
    with pytest.raises(ValidationError, match="not found"):
        read_scores(tmp_path / "missing.csv")


def test_format_real_is_stable():
    """Test that reals printed with 9 digits survive a parse-print cycle."""
    for value in (0.1, 1.0 / 3.0, 1e-300, 0.999999999999, float("nan"), 86.94):
        text = format_real(value)
        assert format_real(float(text)) == text


def _embeddings():
    rng = np.random.default_rng(7)
    return [
        Embedding("s1", "a", "cam1_d1", rng.normal(size=5)),
        Embedding("s2", "b", None, rng.normal(size=5)),
    ]


def test_embedding_csv_round_trip(tmp_path):
    """Test that CSV embeddings keep every component exactly."""
    original = _embeddings()
    loaded = read_embeddings(write_embeddings(tmp_path / "e.csv", original))
    assert [e.subject_id for e in loaded] == ["s1", "s2"]
    assert loaded[1].setting_id is None
    for a, b in zip(original, loaded):
        np.testing.assert_array_equal(a.vector, b.vector)


def test_embedding_binary_layout(tmp_path):
    """Test the FEV1 header and float32 payload."""
    original = _embeddings()
    path = write_embeddings_binary(tmp_path / "e.bin", original)
    data = path.read_bytes()
    assert data[:4] == BINARY_MAGIC
    assert struct.unpack("<II", data[4:12]) == (5, 2)

    loaded = read_embeddings(path)
    assert loaded[0].setting_id == "cam1_d1"
    for a, b in zip(original, loaded):
        np.testing.assert_array_equal(a.vector.astype(np.float32).astype(np.float64), b.vector)


def test_embedding_binary_truncated(tmp_path):
    """Test that a truncated binary file is rejected."""
    path = write_embeddings_binary(tmp_path / "e.bin", _embeddings())
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FormatError, match="truncated"):
        read_embeddings(path)


def test_embedding_csv_dim_mismatch(tmp_path):
    """Test that the dim column must match the vector columns."""
    path = tmp_path / "e.csv"
    path.write_text("subject_id,sample_id,setting_id,dim,v0,v1\ns1,a,,3,0.1,0.2\n")
    with pytest.raises(FormatError) as excinfo:
        read_embeddings(path)
    assert excinfo.value.line == 2


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    """Test that an interrupted write keeps neither a partial nor a temp file."""
    target = tmp_path / "out.csv"
    target.write_text("previous\n")
    with pytest.raises(RuntimeError):
        with atomic_write(target) as handle:
            handle.write("partial")
            raise RuntimeError("interrupted")
    assert target.read_text() == "previous\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.csv"]


def test_readers_reject_non_utf8_text(tmp_path):
    """Test that undecodable score and embedding CSVs raise FormatError naming the file."""
    scores = tmp_path / "s.csv"
    scores.write_bytes(b"system_id,setting_id\n\xff\xfe,cam1_d1\n")
    with pytest.raises(FormatError, match="UTF-8") as excinfo:
        read_scores(scores)
    assert excinfo.value.path == scores

    embeddings = tmp_path / "e.csv"
    embeddings.write_bytes(b"subject_id,sample_id,setting_id,dim,v0\ns\xff,a,,1,0.5\n")
    with pytest.raises(FormatError, match="UTF-8"):
        read_embeddings(embeddings)


def test_embedding_binary_rejects_non_utf8_identifier(tmp_path):
    """Test that a binary record with an undecodable subject id is rejected."""
    path = tmp_path / "e.bin"
    path.write_bytes(
        BINARY_MAGIC
        + struct.pack("<II", 1, 1)
        + struct.pack("<H", 2)
        + b"\xff\xfe"
        + struct.pack("<H", 1)
        + b"a"
        + struct.pack("<H", 0)
        + struct.pack("<f", 1.0)
    )
    with pytest.raises(FormatError, match="UTF-8"):
        read_embeddings(path)
