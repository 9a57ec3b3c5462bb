"""Score-level fusion of verification systems."""

from .base import BaseFusionRule, TrialKey, TrialMatrix, align_trials
from .rules import (
    RULES,
    AvgRule,
    MaxRule,
    MinRule,
    fuse_all,
    fuse_avg,
    fuse_max,
    fuse_min,
    get_rule,
)

__all__ = [
    "BaseFusionRule",
    "TrialKey",
    "TrialMatrix",
    "align_trials",
    "RULES",
    "AvgRule",
    "MaxRule",
    "MinRule",
    "fuse_all",
    "fuse_avg",
    "fuse_max",
    "fuse_min",
    "get_rule",
]
