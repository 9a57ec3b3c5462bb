"""Acquisition settings, cross-setting pair enumeration and identity partitioning."""

import itertools
import logging
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class SettingDescriptor:
    """One acquisition configuration: a surveillance camera at a fixed distance.

    Attributes:
        camera_id: Camera identifier, ``cam1`` .. ``cam5``.
        distance_id: Distance identifier, ``d1`` (farthest) .. ``d3`` (closest).
    """

    camera_id: str
    distance_id: str

    def __post_init__(self):
        if self.camera_id not in CAMERA_IDS:
            raise ValidationError(f"unknown camera {self.camera_id!r}")
        if self.distance_id not in DISTANCES_M:
            raise ValidationError(f"unknown distance {self.distance_id!r}")

    @property
    def distance_m(self) -> float:
        return DISTANCES_M[self.distance_id]

    @property
    def setting_id(self) -> str:
        return f"{self.camera_id}_{self.distance_id}"

    @classmethod
    def parse(cls, setting_id: str) -> "SettingDescriptor":
        """Parse a ``cam<k>_d<j>`` setting id."""
        match = _SETTING_PATTERN.fullmatch(setting_id)
        if not match:
            raise ValidationError(
                f"setting id {setting_id!r} is not of the form cam<1-5>_d<1-3>"
            )
        return cls(match.group(1), match.group(2))

    def __str__(self) -> str:
        return self.setting_id


_SETTING_PATTERN = re.compile(r"(cam[1-5])_(d[1-3])")

# Five surveillance cameras
CAMERA_IDS = ("cam1", "cam2", "cam3", "cam4", "cam5")

# Acquisition distances, farthest first
DISTANCES_M: Dict[str, float] = {
    "d1": 4.2,
    "d2": 2.6,
    "d3": 1.0,
}

SETTINGS: List[SettingDescriptor] = [
    SettingDescriptor(camera, distance) for camera in CAMERA_IDS for distance in DISTANCES_M
]
SETTING_IDS: List[str] = [setting.setting_id for setting in SETTINGS]

CROSS_CAMERA = "cross-camera"
CROSS_DISTANCE = "cross-distance"
CROSS_BOTH = "cross-both"
CATEGORIES = (CROSS_CAMERA, CROSS_DISTANCE, CROSS_BOTH)


def cross_pairs(settings: Iterable[str]) -> List[Tuple[str, str]]:
    """Every ordered (train, test) pair of distinct settings, sorted."""
    unique = sorted(set(settings))
    return [(train, test) for train, test in itertools.permutations(unique, 2)]


def classify_pair(train_setting: str, test_setting: str) -> str:
    """Category of a cross-setting pair.

    Returns:
        ``cross-camera`` (same distance, other camera), ``cross-distance``
        (same camera, other distance) or ``cross-both``.
    """
    train = SettingDescriptor.parse(train_setting)
    test = SettingDescriptor.parse(test_setting)
    if train == test:
        raise ValidationError(f"{train_setting} -> {test_setting} is not a cross-setting pair")
    if train.distance_id == test.distance_id:
        return CROSS_CAMERA
    if train.camera_id == test.camera_id:
        return CROSS_DISTANCE
    return CROSS_BOTH


def filter_pairs(pairs: Sequence[Tuple[str, str]], category: str) -> List[Tuple[str, str]]:
    """Keep the pairs of one category."""
    if category not in CATEGORIES:
        raise ValidationError(f"unknown pair category {category!r}")
    return [pair for pair in pairs if classify_pair(*pair) == category]


@dataclass(frozen=True)
class Partition:
    """Disjoint test/train/validation split of an identity universe."""

    test_ids: Tuple[str, ...]
    train_ids: Tuple[str, ...]
    val_ids: Tuple[str, ...]
    seed: int

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.test_ids), len(self.train_ids), len(self.val_ids)


# Size of the evaluation population in the reference database
REFERENCE_UNIVERSE = 130
REFERENCE_TEST_SIZE = 25


def partition_identities(ids: Iterable[str], seed: int) -> Partition:
    """Split identities into test, train and validation sets.

    The sorted ids are shuffled with ``seed``. The test set takes 25 ids for a
    130-id universe and round(20%) otherwise; of the rest, floor(90%) go to
    training and the remainder to validation.

    Args:
        ids: Distinct identity ids, at least 3.
        seed: Shuffle seed.

    Returns:
        The Partition.

    Raises:
        ValidationError: On duplicate ids or when a split would be empty.
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("identity ids must be distinct")
    n = len(ids)
    if n < 3:
        raise ValidationError(f"need at least 3 identities to partition, got {n}")

    n_test = REFERENCE_TEST_SIZE if n == REFERENCE_UNIVERSE else (2 * n + 5) // 10
    rest = n - n_test
    n_train = (9 * rest) // 10
    n_val = rest - n_train
    if min(n_test, n_train, n_val) < 1:
        raise ValidationError(
            f"{n} identities cannot give every split at least one member "
            f"(test {n_test}, train {n_train}, val {n_val})"
        )

    order = np.random.default_rng(seed).permutation(n)
    ordered = sorted(ids)
    shuffled = [ordered[i] for i in order]
    partition = Partition(
        test_ids=tuple(shuffled[:n_test]),
        train_ids=tuple(shuffled[n_test : n_test + n_train]),
        val_ids=tuple(shuffled[n_test + n_train :]),
        seed=seed,
    )
    logger.debug("Partitioned %d identities into %s", n, partition.sizes)
    return partition
