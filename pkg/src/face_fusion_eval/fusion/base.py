"""Trial alignment across systems and the base class for fusion rules."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from ..errors import FusionError
from ..scores import Label, ScoreRecord, ScoreSet

logger = logging.getLogger(__name__)


class TrialKey(NamedTuple):
    """Identifies one comparison independently of the system that scored it.

    Tuple ordering gives the lexicographic total order used for alignment.
    """

    setting_id: str
    reference_subject: str
    probe_subject: str
    probe_sample: str

    @classmethod
    def of(cls, record: ScoreRecord) -> "TrialKey":
        return cls(
            record.setting_id, record.reference_subject, record.probe_subject, record.probe_sample
        )

    @property
    def label(self) -> Label:
        return Label.for_subjects(self.reference_subject, self.probe_subject)


@dataclass
class TrialMatrix:
    """Scores of N systems aligned on identical trial keys.

    Attributes:
        systems: Column order, one system id per column.
        keys: Row keys in ascending order.
        labels: Boolean array, True for genuine rows.
        scores: Array of shape (len(keys), len(systems)) with values in ]0, 1].
        dropped: Number of keys each system had that are missing from another.
    """

    systems: List[str]
    keys: List[TrialKey]
    labels: np.ndarray
    scores: np.ndarray
    dropped: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.systems) < 2:
            raise FusionError("fusion requires ≥ 2 systems")
        if len(set(self.systems)) != len(self.systems):
            raise FusionError(f"system ids must be distinct, got {self.systems}")
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.scores.shape != (len(self.keys), len(self.systems)):
            raise FusionError(
                f"score array shape {self.scores.shape} does not match "
                f"{len(self.keys)} rows x {len(self.systems)} systems"
            )
        expected = np.fromiter(
            (key.label is Label.GENUINE for key in self.keys), dtype=bool, count=len(self.keys)
        )
        if not np.array_equal(expected, self.labels):
            raise FusionError("row labels are inconsistent with their trial keys")
        if np.any(self.scores <= 0.0) or np.any(self.scores > 1.0):
            raise FusionError("trial matrix scores must lie in ]0, 1]")

    @property
    def rows(self) -> Dict[TrialKey, Tuple[Label, Tuple[float, ...]]]:
        """Row view keyed by TrialKey: (label, one score per system)."""
        return {
            key: (Label.GENUINE if genuine else Label.IMPOSTOR, tuple(row.tolist()))
            for key, genuine, row in zip(self.keys, self.labels, self.scores)
        }

    def column(self, system_id: str) -> np.ndarray:
        return self.scores[:, self.systems.index(system_id)]

    def __len__(self) -> int:
        return len(self.keys)


def align_trials(sets: Sequence[ScoreSet]) -> TrialMatrix:
    """Align N score sets on the strict intersection of their trial keys.

    Args:
        sets: One ScoreSet per system, each from a distinct system.

    Returns:
        The aligned TrialMatrix; ``dropped`` reports per system how many of its
        keys were absent from at least one other set.

    Raises:
        FusionError: With fewer than 2 systems, repeated system ids, duplicate
            keys inside one set, or an empty intersection.
    """
    if len(sets) < 2:
        raise FusionError("fusion requires ≥ 2 systems")

    systems: List[str] = []
    by_system: List[Dict[TrialKey, float]] = []
    for score_set in sets:
        ids = score_set.systems()
        if len(ids) != 1:
            raise FusionError(f"each score set must hold exactly one system, got {ids}")
        system_id = ids[0]
        if system_id in systems:
            raise FusionError(f"system {system_id!r} given more than once")
        scores: Dict[TrialKey, float] = {}
        for record in score_set:
            key = TrialKey.of(record)
            if key in scores:
                raise FusionError(f"duplicate trial {key} in system {system_id!r}")
            scores[key] = record.score
        systems.append(system_id)
        by_system.append(scores)

    common = set(by_system[0])
    for scores in by_system[1:]:
        common &= scores.keys()
    if not common:
        raise FusionError(f"systems {systems} share no trial")

    keys = sorted(common)
    dropped = {system_id: len(scores) - len(keys) for system_id, scores in zip(systems, by_system)}
    if any(dropped.values()):
        logger.warning("Strict intersection dropped trials per system: %s", dropped)

    matrix = np.array([[scores[key] for scores in by_system] for key in keys], dtype=np.float64)
    labels = np.array([key.reference_subject == key.probe_subject for key in keys], dtype=bool)
    return TrialMatrix(systems=systems, keys=keys, labels=labels, scores=matrix, dropped=dropped)


class BaseFusionRule(ABC):
    """Base class for non-parametric score-level fusion rules."""

    @abstractmethod
    def get_name(self) -> str:
        """Get the short rule name used on the command line.

        Returns:
            The rule name, e.g. ``"avg"``.
        """
        pass

    @abstractmethod
    def combine(self, scores: np.ndarray) -> np.ndarray:
        """Combine a (rows, N) score array into one score per row.

        Args:
            scores: Aligned scores, one column per system.

        Returns:
            Array of fused scores, one per row.
        """
        pass

    def fused_system_id(self, systems: Sequence[str]) -> str:
        """Canonical, order-independent id of the fused system."""
        return f"fusion:{self.get_name()}({','.join(sorted(systems))})"

    def fuse(self, matrix: TrialMatrix) -> ScoreSet:
        """Apply the rule row-wise and return the fused scores as a ScoreSet.

        Args:
            matrix: Aligned scores of at least two systems.

        Returns:
            ScoreSet with exactly the matrix keys, under the fused system id.
        """
        fused = self.combine(matrix.scores)
        system_id = self.fused_system_id(matrix.systems)
        records = [
            ScoreRecord(
                system_id=system_id,
                setting_id=key.setting_id,
                reference_subject=key.reference_subject,
                probe_subject=key.probe_subject,
                probe_sample=key.probe_sample,
                label=Label.GENUINE if genuine else Label.IMPOSTOR,
                score=float(score),
            )
            for key, genuine, score in zip(matrix.keys, matrix.labels, fused)
        ]
        logger.info("Fused %d trials into %s", len(records), system_id)
        return ScoreSet(records, system_id=system_id)
