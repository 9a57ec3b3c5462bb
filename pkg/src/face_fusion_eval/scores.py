"""Embeddings, verification scores and the distance-to-probability score model.

A score is the a-posteriori match probability ``1 / (d + 1)`` where ``d`` is the
Euclidean distance between a reference embedding and a probe embedding, so every
score lies in ]0, 1].
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError

logger = logging.getLogger(__name__)


class Label(str, Enum):
    """Ground truth of a verification trial."""

    GENUINE = "genuine"
    IMPOSTOR = "impostor"

    @classmethod
    def for_subjects(cls, reference_subject: str, probe_subject: str) -> "Label":
        """Label a trial from subject identity alone."""
        return cls.GENUINE if reference_subject == probe_subject else cls.IMPOSTOR


@dataclass(frozen=True)
class Embedding:
    """One face sample represented as a real vector."""

    subject_id: str
    sample_id: str
    setting_id: Optional[str]
    vector: np.ndarray

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=np.float64)
        if vector.ndim != 1 or vector.size < 1:
            raise ValidationError(
                f"embedding {self.subject_id}/{self.sample_id} must be a non-empty 1-D vector"
            )
        if not np.all(np.isfinite(vector)):
            raise ValidationError(
                f"embedding {self.subject_id}/{self.sample_id} has non-finite components"
            )
        object.__setattr__(self, "vector", vector)

    @property
    def dim(self) -> int:
        return int(self.vector.size)

    def l2_normalized(self) -> "Embedding":
        """Return a copy scaled to unit L2 norm (zero vectors are kept as is)."""
        norm = float(np.linalg.norm(self.vector))
        if norm == 0.0:
            return self
        return Embedding(self.subject_id, self.sample_id, self.setting_id, self.vector / norm)


RecordKey = Tuple[str, str, str, str, str]


@dataclass(frozen=True)
class ScoreRecord:
    """A single verification trial and its match probability."""

    system_id: str
    setting_id: str
    reference_subject: str
    probe_subject: str
    probe_sample: str
    label: Label
    score: float

    def __post_init__(self):
        label = Label(self.label)
        object.__setattr__(self, "label", label)
        if label is not Label.for_subjects(self.reference_subject, self.probe_subject):
            raise ValidationError(
                f"label {label.value} contradicts subjects "
                f"{self.reference_subject!r} / {self.probe_subject!r}"
            )
        score = float(self.score)
        if not (0.0 < score <= 1.0):
            raise ValidationError(f"score {score!r} outside ]0, 1] for trial {self.key}")
        object.__setattr__(self, "score", score)

    @property
    def key(self) -> RecordKey:
        return (
            self.system_id,
            self.setting_id,
            self.reference_subject,
            self.probe_subject,
            self.probe_sample,
        )

    @property
    def is_genuine(self) -> bool:
        return self.label is Label.GENUINE


@dataclass
class ScoreSet:
    """Score records of one or more systems, kept in canonical key order.

    Attributes:
        records: The trials, sorted by record key on construction.
        system_id: Provenance system id (None when the set mixes systems).
        setting_filter: Setting the records were restricted to, if any.
    """

    records: List[ScoreRecord]
    system_id: Optional[str] = None
    setting_filter: Optional[str] = None
    _scores: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _genuine: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda record: record.key)
        for previous, current in zip(self.records, self.records[1:]):
            if previous.key == current.key:
                raise ValidationError(f"duplicate score record key {current.key}")
        if self.system_id is None:
            systems = {record.system_id for record in self.records}
            if len(systems) == 1:
                self.system_id = systems.pop()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ScoreRecord]:
        return iter(self.records)

    def scores(self) -> np.ndarray:
        """All scores in record order as a float64 array."""
        if self._scores is None:
            self._scores = np.fromiter(
                (record.score for record in self.records), dtype=np.float64, count=len(self)
            )
        return self._scores

    def genuine_mask(self) -> np.ndarray:
        if self._genuine is None:
            self._genuine = np.fromiter(
                (record.is_genuine for record in self.records), dtype=bool, count=len(self)
            )
        return self._genuine

    def genuine_scores(self) -> np.ndarray:
        return self.scores()[self.genuine_mask()]

    def impostor_scores(self) -> np.ndarray:
        return self.scores()[~self.genuine_mask()]

    @property
    def n_genuine(self) -> int:
        return int(self.genuine_mask().sum())

    @property
    def n_impostor(self) -> int:
        return len(self) - self.n_genuine

    def systems(self) -> List[str]:
        return sorted({record.system_id for record in self.records})

    def settings(self) -> List[str]:
        return sorted({record.setting_id for record in self.records})

    def for_system(self, system_id: str) -> "ScoreSet":
        return ScoreSet(
            [record for record in self.records if record.system_id == system_id],
            system_id=system_id,
            setting_filter=self.setting_filter,
        )

    def for_setting(self, setting_id: str) -> "ScoreSet":
        return ScoreSet(
            [record for record in self.records if record.setting_id == setting_id],
            system_id=self.system_id,
            setting_filter=setting_id,
        )

    def require_both_classes(self) -> None:
        """Raise unless the set holds at least one genuine and one impostor trial."""
        if self.n_genuine == 0 or self.n_impostor == 0:
            raise ValidationError(
                f"score set {self.system_id or '<mixed>'} needs at least one genuine and one "
                f"impostor trial (has {self.n_genuine} genuine, {self.n_impostor} impostor)"
            )


def euclidean_distance(a: Embedding, b: Embedding) -> float:
    """L2 norm of the component-wise difference, in double precision."""
    if a.dim != b.dim:
        raise ValidationError(f"embedding dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.vector - b.vector))


def distance_to_probability(d: float) -> float:
    """Map a nonnegative distance onto ]0, 1] as ``1 / (d + 1)``."""
    if not math.isfinite(d) or d < 0:
        raise ValidationError(f"distance must be finite and nonnegative, got {d!r}")
    return 1.0 / (d + 1.0)


def _stack(embeddings: Sequence[Embedding], role: str) -> np.ndarray:
    if not embeddings:
        raise ValidationError(f"no {role} embeddings given")
    dims = {embedding.dim for embedding in embeddings}
    if len(dims) != 1:
        raise ValidationError(f"{role} embeddings have mixed dimensions {sorted(dims)}")
    return np.vstack([embedding.vector for embedding in embeddings])


def score_trials(
    references: Iterable[Embedding],
    probes: Iterable[Embedding],
    system_id: str,
    setting_id: Optional[str] = None,
    l2_normalize: bool = False,
) -> ScoreSet:
    """Score every (reference, probe) pair.

    Args:
        references: Reference (gallery) embeddings.
        probes: Probe embeddings.
        system_id: Id of the recognition system that produced the embeddings.
        setting_id: Setting written on every record. When None, each probe's
            own ``setting_id`` is used.
        l2_normalize: Scale embeddings to unit norm before measuring distances.

    Returns:
        A ScoreSet with one record per pair, in canonical key order.

    Raises:
        ValidationError: On empty inputs, mixed or mismatched dimensions, or a
            probe without any setting.
    """
    references = list(references)
    probes = list(probes)
    if l2_normalize:
        references = [embedding.l2_normalized() for embedding in references]
        probes = [embedding.l2_normalized() for embedding in probes]

    reference_subjects = [reference.subject_id for reference in references]
    if len(set(reference_subjects)) != len(reference_subjects):
        raise ValidationError("references must hold exactly one embedding per subject")

    reference_matrix = _stack(references, "reference")
    probe_matrix = _stack(probes, "probe")
    if reference_matrix.shape[1] != probe_matrix.shape[1]:
        raise ValidationError(
            f"embedding dimension mismatch: references {reference_matrix.shape[1]} "
            f"vs probes {probe_matrix.shape[1]}"
        )

    distances = cdist(reference_matrix, probe_matrix, metric="euclidean")
    probabilities = 1.0 / (distances + 1.0)

    records = []
    for j, probe in enumerate(probes):
        trial_setting = setting_id if setting_id is not None else probe.setting_id
        if trial_setting is None:
            raise ValidationError(
                f"probe {probe.subject_id}/{probe.sample_id} has no setting id "
                "and none was given"
            )
        for i, reference in enumerate(references):
            records.append(
                ScoreRecord(
                    system_id=system_id,
                    setting_id=trial_setting,
                    reference_subject=reference.subject_id,
                    probe_subject=probe.subject_id,
                    probe_sample=probe.sample_id,
                    label=Label.for_subjects(reference.subject_id, probe.subject_id),
                    score=float(probabilities[i, j]),
                )
            )
    score_set = ScoreSet(records, system_id=system_id, setting_filter=setting_id)
    logger.info(
        "Scored %d trials for %s (%d genuine, %d impostor)",
        len(score_set),
        system_id,
        score_set.n_genuine,
        score_set.n_impostor,
    )
    return score_set
