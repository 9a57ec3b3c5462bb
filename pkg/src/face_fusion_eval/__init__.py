"""Face verification score fusion and evaluation toolkit."""

__version__ = "0.1.0"

from .errors import FaceFusionError, ValidationError
from .fusion import align_trials, fuse_avg, fuse_max, fuse_min
from .metrics import MetricsReport, evaluate
from .scores import Embedding, ScoreRecord, ScoreSet, score_trials

__all__ = [
    "__version__",
    "FaceFusionError",
    "ValidationError",
    "align_trials",
    "fuse_avg",
    "fuse_max",
    "fuse_min",
    "MetricsReport",
    "evaluate",
    "Embedding",
    "ScoreRecord",
    "ScoreSet",
    "score_trials",
]
