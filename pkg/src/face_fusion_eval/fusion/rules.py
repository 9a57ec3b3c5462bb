"""The average, maximum and minimum fusion rules."""

from typing import Dict, List, Sequence

import numpy as np

from ..errors import FusionError
from ..scores import ScoreSet
from .base import BaseFusionRule, TrialMatrix


class AvgRule(BaseFusionRule):
    """Arithmetic mean of the N system scores."""

    def get_name(self) -> str:
        return "avg"

    def combine(self, scores: np.ndarray) -> np.ndarray:
        low = scores.min(axis=1)
        high = scores.max(axis=1)
        # summed in sorted order so the result does not depend on system order;
        # mean of equal values is not always bit-equal to them; rows stay within [min, max]
        mean = np.clip(np.sort(scores, axis=1).mean(axis=1), low, high)
        return np.where(low == high, scores[:, 0], mean)


class MaxRule(BaseFusionRule):
    """Largest of the N system scores."""

    def get_name(self) -> str:
        return "max"

    def combine(self, scores: np.ndarray) -> np.ndarray:
        return scores.max(axis=1)


class MinRule(BaseFusionRule):
    """Smallest of the N system scores."""

    def get_name(self) -> str:
        return "min"

    def combine(self, scores: np.ndarray) -> np.ndarray:
        return scores.min(axis=1)


# Report order: avg, min, max
RULES: Dict[str, BaseFusionRule] = {
    rule.get_name(): rule for rule in (AvgRule(), MinRule(), MaxRule())
}


def get_rule(name: str) -> BaseFusionRule:
    """Look up a fusion rule by name."""
    try:
        return RULES[name]
    except KeyError:
        raise FusionError(f"unknown fusion rule {name!r}; choose from {', '.join(RULES)}")


def fuse_avg(matrix: TrialMatrix) -> ScoreSet:
    return RULES["avg"].fuse(matrix)


def fuse_max(matrix: TrialMatrix) -> ScoreSet:
    return RULES["max"].fuse(matrix)


def fuse_min(matrix: TrialMatrix) -> ScoreSet:
    return RULES["min"].fuse(matrix)


def fuse_all(matrix: TrialMatrix, rule_names: Sequence[str]) -> List[ScoreSet]:
    """Apply several rules to one matrix, in the order given."""
    return [get_rule(name).fuse(matrix) for name in rule_names]
