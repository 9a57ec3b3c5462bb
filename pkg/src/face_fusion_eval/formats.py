"""Readers and writers for every file format the toolkit exchanges.

All writers go through :func:`atomic_write`, so an interrupted run never leaves a
partially written file behind. The formats are documented in ``docs/FORMATS.md``.
"""

import csv
import io
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

from .errors import FormatError, ValidationError
from .scores import Embedding, Label, ScoreRecord, ScoreSet

PathLike = Union[str, Path]

SCORE_HEADER = [
    "system_id",
    "setting_id",
    "reference_subject",
    "probe_subject",
    "probe_sample",
    "label",
    "score",
]
EMBEDDING_FIXED_COLUMNS = ["subject_id", "sample_id", "setting_id", "dim"]
BINARY_MAGIC = b"FEV1"


def format_real(value: float) -> str:
    """Print a real with 9 significant digits."""
    return format(float(value), ".9g")


@contextmanager
def atomic_write(path: PathLike, mode: str = "w") -> Iterator[IO]:
    """Open a temporary sibling of ``path`` and move it into place on success.

    Args:
        path: Final destination.
        mode: ``"w"`` for text (UTF-8, ``\\n`` line endings) or ``"wb"`` for bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if "b" in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding="utf-8", newline="")
        with handle:
            yield handle
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


@contextmanager
def atomic_path(path: PathLike) -> Iterator[Path]:
    """Yield a temporary path for writers that need a filename (PNG, SVG)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=path.suffix, dir=path.parent)
    os.close(fd)
    try:
        yield Path(temp_name)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    """Write a CSV table atomically with ``\\n`` line endings."""
    with atomic_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return Path(path)


@contextmanager
def open_text(path: Path) -> Iterator[IO[str]]:
    """Open a UTF-8 text file for reading; decoding failures become FormatError."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            yield handle
    except UnicodeDecodeError:
        raise FormatError("file is not valid UTF-8 text", path=path)


def read_csv(path: PathLike, expected_header: Optional[Sequence[str]] = None) -> List[dict]:
    """Read a CSV table into dictionaries, validating the header if given."""
    path = Path(path)
    if not path.exists():
        raise ValidationError("file not found", path=path)
    with open_text(path) as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file", path=path)
        if expected_header is not None and header != list(expected_header):
            raise FormatError(
                f"expected header {','.join(expected_header)}, got {','.join(header)}",
                path=path,
                line=1,
            )
        rows = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"expected {len(header)} fields, got {len(row)}", path=path, line=line_number
                )
            entry = dict(zip(header, row))
            entry["__line__"] = line_number
            rows.append(entry)
    return rows


def parse_real(text: str, path: Path, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{what} is not a number: {text!r}", path=path, line=line)


# Score files


def read_scores(path: PathLike) -> ScoreSet:
    """Read a score CSV into a ScoreSet."""
    path = Path(path)
    records = []
    for row in read_csv(path, SCORE_HEADER):
        line = row["__line__"]
        if row["label"] not in (Label.GENUINE.value, Label.IMPOSTOR.value):
            raise FormatError(f"unknown label {row['label']!r}", path=path, line=line)
        try:
            records.append(
                ScoreRecord(
                    system_id=row["system_id"],
                    setting_id=row["setting_id"],
                    reference_subject=row["reference_subject"],
                    probe_subject=row["probe_subject"],
                    probe_sample=row["probe_sample"],
                    label=Label(row["label"]),
                    score=parse_real(row["score"], path, line, "score"),
                )
            )
        except FormatError:
            raise
        except ValidationError as e:
            raise FormatError(e.message, path=path, line=line)
    try:
        return ScoreSet(records)
    except ValidationError as e:
        raise FormatError(e.message, path=path)


def write_scores(path: PathLike, score_sets: Union[ScoreSet, Sequence[ScoreSet]]) -> Path:
    """Write one or more score sets to a single score CSV."""
    if isinstance(score_sets, ScoreSet):
        score_sets = [score_sets]
    records = sorted(
        (record for score_set in score_sets for record in score_set), key=lambda r: r.key
    )
    rows = (
        [
            record.system_id,
            record.setting_id,
            record.reference_subject,
            record.probe_subject,
            record.probe_sample,
            record.label.value,
            format_real(record.score),
        ]
        for record in records
    )
    return write_csv(path, SCORE_HEADER, rows)


# Embedding files


def read_embeddings(path: PathLike) -> List[Embedding]:
    """Read embeddings from CSV or from the FEV1 binary format (sniffed by magic)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError("file not found", path=path)
    with open(path, "rb") as handle:
        magic = handle.read(len(BINARY_MAGIC))
    if magic == BINARY_MAGIC:
        return _read_embeddings_binary(path)
    return _read_embeddings_csv(path)


def _read_embeddings_csv(path: Path) -> List[Embedding]:
    with open_text(path) as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file", path=path)
        if header[:4] != EMBEDDING_FIXED_COLUMNS:
            raise FormatError(
                f"header must start with {','.join(EMBEDDING_FIXED_COLUMNS)}", path=path, line=1
            )
        dim = len(header) - 4
        expected = [f"v{i}" for i in range(dim)]
        if dim < 1 or header[4:] != expected:
            raise FormatError("vector columns must be v0, v1, ... in order", path=path, line=1)

        embeddings = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"expected {len(header)} fields, got {len(row)}", path=path, line=line_number
                )
            if row[3] != str(dim):
                raise FormatError(
                    f"dim {row[3]!r} does not match the {dim} vector columns",
                    path=path,
                    line=line_number,
                )
            vector = [parse_real(value, path, line_number, "component") for value in row[4:]]
            try:
                embeddings.append(Embedding(row[0], row[1], row[2] or None, np.array(vector)))
            except ValidationError as e:
                raise FormatError(e.message, path=path, line=line_number)
    if not embeddings:
        raise FormatError("no embeddings in file", path=path)
    return embeddings


def _read_string(buffer: io.BytesIO, path: Path) -> str:
    raw_length = buffer.read(2)
    if len(raw_length) != 2:
        raise FormatError("truncated record", path=path)
    (length,) = struct.unpack("<H", raw_length)
    data = buffer.read(length)
    if len(data) != length:
        raise FormatError("truncated record", path=path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("identifier is not valid UTF-8", path=path)


def _read_embeddings_binary(path: Path) -> List[Embedding]:
    buffer = io.BytesIO(path.read_bytes())
    buffer.read(len(BINARY_MAGIC))
    header = buffer.read(8)
    if len(header) != 8:
        raise FormatError("truncated header", path=path)
    dim, count = struct.unpack("<II", header)
    if dim < 1:
        raise FormatError("dimension must be at least 1", path=path)

    embeddings = []
    for index in range(count):
        subject_id = _read_string(buffer, path)
        sample_id = _read_string(buffer, path)
        setting_id = _read_string(buffer, path)
        data = buffer.read(4 * dim)
        if len(data) != 4 * dim:
            raise FormatError(f"truncated vector in record {index}", path=path)
        vector = np.frombuffer(data, dtype="<f4").astype(np.float64)
        try:
            embeddings.append(Embedding(subject_id, sample_id, setting_id or None, vector))
        except ValidationError as e:
            raise FormatError(f"record {index}: {e.message}", path=path)
    if buffer.read(1):
        raise FormatError("trailing bytes after the last record", path=path)
    if not embeddings:
        raise FormatError("no embeddings in file", path=path)
    return embeddings


def write_embeddings(path: PathLike, embeddings: Sequence[Embedding]) -> Path:
    """Write embeddings as CSV (vectors printed with 17 significant digits)."""
    dims = {embedding.dim for embedding in embeddings}
    if len(dims) != 1:
        raise ValidationError(f"embeddings must share one dimension, got {sorted(dims)}")
    dim = dims.pop()
    header = EMBEDDING_FIXED_COLUMNS + [f"v{i}" for i in range(dim)]
    rows = (
        [e.subject_id, e.sample_id, e.setting_id or "", str(dim)]
        + [format(float(value), ".17g") for value in e.vector]
        for e in embeddings
    )
    return write_csv(path, header, rows)


def write_embeddings_binary(path: PathLike, embeddings: Sequence[Embedding]) -> Path:
    """Write embeddings in the FEV1 binary format (float32 components)."""
    dims = {embedding.dim for embedding in embeddings}
    if len(dims) != 1:
        raise ValidationError(f"embeddings must share one dimension, got {sorted(dims)}")
    dim = dims.pop()
    with atomic_write(path, "wb") as handle:
        handle.write(BINARY_MAGIC)
        handle.write(struct.pack("<II", dim, len(embeddings)))
        for embedding in embeddings:
            for text in (embedding.subject_id, embedding.sample_id, embedding.setting_id or ""):
                data = text.encode("utf-8")
                handle.write(struct.pack("<H", len(data)))
                handle.write(data)
            handle.write(embedding.vector.astype("<f4").tobytes())
    return Path(path)
