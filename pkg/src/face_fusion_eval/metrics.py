"""Verification metrics: error rates, ROC, AUC, EER, operating points, Cohen's d, PCC.

Decision rule everywhere: a trial is a match iff ``score >= threshold``. Rates are
fractions in [0, 1]; the summary metrics are reported in percent except Cohen's d.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .errors import MetricError
from .fusion.base import TrialMatrix
from .scores import ScoreSet

logger = logging.getLogger(__name__)

FMR = "fmr"
FNMR = "fnmr"


@dataclass(frozen=True)
class ScoreSamples:
    """Genuine and impostor scores as plain arrays."""

    genuine: np.ndarray
    impostor: np.ndarray

    @classmethod
    def of(cls, scores: Union["ScoreSamples", ScoreSet]) -> "ScoreSamples":
        if isinstance(scores, ScoreSamples):
            samples = scores
        else:
            samples = cls(scores.genuine_scores(), scores.impostor_scores())
        if samples.genuine.size == 0 or samples.impostor.size == 0:
            raise MetricError(
                f"need at least one genuine and one impostor score "
                f"(got {samples.genuine.size} genuine, {samples.impostor.size} impostor)"
            )
        return samples

    @classmethod
    def concatenate(cls, parts: Sequence[Union["ScoreSamples", ScoreSet]]) -> "ScoreSamples":
        """Pool several score collections into one."""
        samples = [cls.of(part) for part in parts]
        return cls(
            np.concatenate([s.genuine for s in samples]),
            np.concatenate([s.impostor for s in samples]),
        )


Scores = Union[ScoreSamples, ScoreSet]


@dataclass(frozen=True)
class RocCurve:
    """Error rates swept over every distinct score plus two sentinel thresholds.

    ``thresholds`` is strictly increasing and starts at -inf (everything matches)
    and ends at +inf (nothing matches).
    """

    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray

    @property
    def points(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.fmr.tolist(), self.fnmr.tolist()))

    def __len__(self) -> int:
        return int(self.thresholds.size)


@dataclass(frozen=True)
class OperatingPoint:
    """Complementary error at a fixed FMR or FNMR target."""

    fixed: str
    target_pct: float
    error_pct: float
    threshold: float
    degenerate: bool


@dataclass(frozen=True)
class MetricsReport:
    """The five summary metrics of one score collection."""

    auc_pct: float
    eer_pct: float
    cohens_d: float
    fmr_at_fnmr1_pct: float
    fnmr_at_fmr1_pct: float
    n_genuine: int
    n_impostor: int

    def as_row(self) -> Tuple[float, float, float, float, float]:
        """Metrics in report column order."""
        return (
            self.auc_pct,
            self.eer_pct,
            self.cohens_d,
            self.fmr_at_fnmr1_pct,
            self.fnmr_at_fmr1_pct,
        )


REPORT_FIELDS = ("auc_pct", "eer_pct", "cohens_d", "fmr_at_fnmr1_pct", "fnmr_at_fmr1_pct")


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson correlation between aligned system scores.

    Undefined pairs (a constant column) hold NaN and are listed in ``undefined``.
    """

    systems: List[str]
    values: np.ndarray
    undefined: Tuple[Tuple[str, str], ...] = ()

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.systems.index(a), self.systems.index(b)])


def confusion_rates(scores: Scores, threshold: float) -> Tuple[float, float]:
    """FMR and FNMR at one threshold.

    Returns:
        ``(fmr, fnmr)``: matched impostors over impostors, unmatched genuines
        over genuines.
    """
    samples = ScoreSamples.of(scores)
    fmr = float(np.count_nonzero(samples.impostor >= threshold)) / samples.impostor.size
    fnmr = float(np.count_nonzero(samples.genuine < threshold)) / samples.genuine.size
    return fmr, fnmr


def roc_curve(scores: Scores) -> RocCurve:
    """Sweep the threshold over every distinct score value.

    Args:
        scores: A ScoreSet or ScoreSamples with both classes present.

    Returns:
        RocCurve with one point per distinct score plus the -inf and +inf
        sentinels; FMR is non-increasing and FNMR non-decreasing.
    """
    samples = ScoreSamples.of(scores)
    genuine = np.sort(samples.genuine)
    impostor = np.sort(samples.impostor)
    distinct = np.unique(np.concatenate([genuine, impostor]))
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])

    # count of values strictly below each threshold
    impostor_below = np.searchsorted(impostor, thresholds, side="left")
    genuine_below = np.searchsorted(genuine, thresholds, side="left")
    fmr = (impostor.size - impostor_below) / impostor.size
    fnmr = genuine_below / genuine.size
    return RocCurve(thresholds=thresholds, fmr=fmr.astype(np.float64), fnmr=fnmr.astype(np.float64))


def auc(scores: Scores) -> float:
    """Trapezoidal area under (FMR, 1 - FNMR), in percent.

    Equals the Mann-Whitney probability that a genuine score beats an
    impostor score, ties counted one half.
    """
    curve = roc_curve(scores)
    tpr = 1.0 - curve.fnmr
    widths = curve.fmr[:-1] - curve.fmr[1:]
    heights = (tpr[:-1] + tpr[1:]) / 2.0
    area = float(np.sum(widths * heights))
    return 100.0 * min(max(area, 0.0), 1.0)


def eer(scores: Scores) -> float:
    """Equal error rate in percent.

    The crossing of FMR and FNMR is found between adjacent ROC points and
    linearly interpolated; where the rates are equal over a plateau the common
    value is returned.
    """
    curve = roc_curve(scores)
    diff = curve.fmr - curve.fnmr
    for k in range(len(curve) - 1):
        if diff[k] == 0.0:
            return 100.0 * float(curve.fmr[k])
        if diff[k] > 0.0 and diff[k + 1] < 0.0:
            alpha = diff[k] / (diff[k] - diff[k + 1])
            value = curve.fmr[k] + alpha * (curve.fmr[k + 1] - curve.fmr[k])
            return 100.0 * float(value)
    # the sentinels guarantee diff goes from +1 to -1
    raise MetricError("no crossing between FMR and FNMR")


def error_at_operating_point(scores: Scores, fixed: str, target_pct: float) -> OperatingPoint:
    """Complementary error rate at a fixed FMR or FNMR target.

    The threshold reaching the largest fixed-rate value not above the target is
    chosen (no interpolation). Among thresholds sharing that value, the one with
    the smallest complementary error wins.

    Args:
        scores: A ScoreSet or ScoreSamples.
        fixed: ``"fmr"`` to fix the false match rate, ``"fnmr"`` to fix the
            false non-match rate.
        target_pct: Target for the fixed rate, in percent, strictly in (0, 100).

    Returns:
        OperatingPoint; ``degenerate`` is set when the complementary error is 100%.
    """
    if fixed not in (FMR, FNMR):
        raise MetricError(f"fixed rate must be 'fmr' or 'fnmr', got {fixed!r}")
    if not (0.0 < target_pct < 100.0):
        raise MetricError(f"target must be strictly between 0 and 100 percent, got {target_pct}")

    curve = roc_curve(scores)
    fixed_rates, other_rates = (
        (curve.fmr, curve.fnmr) if fixed == FMR else (curve.fnmr, curve.fmr)
    )
    target = target_pct / 100.0
    feasible = np.flatnonzero(fixed_rates <= target)
    best_fixed = fixed_rates[feasible].max()
    candidates = feasible[fixed_rates[feasible] == best_fixed]
    chosen = candidates[np.argmin(other_rates[candidates])]

    error_pct = 100.0 * float(other_rates[chosen])
    degenerate = error_pct >= 100.0
    if degenerate:
        logger.warning(
            "%s cannot reach %.3g%% without rejecting every trial", fixed.upper(), target_pct
        )
    return OperatingPoint(
        fixed=fixed,
        target_pct=float(target_pct),
        error_pct=error_pct,
        threshold=float(curve.thresholds[chosen]),
        degenerate=degenerate,
    )


def cohens_d(scores: Scores) -> float:
    """Standardised mean difference between genuine and impostor scores.

    Uses the pooled standard deviation with Bessel-corrected class variances.
    """
    samples = ScoreSamples.of(scores)
    n_g = samples.genuine.size
    n_i = samples.impostor.size
    if n_g < 2 or n_i < 2:
        raise MetricError(
            f"Cohen's d needs at least 2 scores per class (got {n_g} genuine, {n_i} impostor)"
        )

    sd_g = np.std(samples.genuine, ddof=1)
    sd_i = np.std(samples.impostor, ddof=1)
    pooled = math.sqrt(((n_g - 1) * sd_g**2 + (n_i - 1) * sd_i**2) / (n_g + n_i - 2))
    if pooled == 0.0:
        raise MetricError("Cohen's d is undefined: pooled standard deviation is zero")
    return float((samples.genuine.mean() - samples.impostor.mean()) / pooled)


def pearson_corr(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation of two aligned score sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"sequences must be 1-D with equal lengths, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise MetricError("correlation needs at least 2 paired scores")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise MetricError("correlation is undefined for a constant sequence")
    r, _ = stats.pearsonr(x, y)
    return float(min(max(r, -1.0), 1.0))


def correlation_matrix(matrix: TrialMatrix) -> CorrelationMatrix:
    """Pairwise PCC between the score columns of a TrialMatrix."""
    n = len(matrix.systems)
    values = np.eye(n, dtype=np.float64)
    undefined = []
    for a in range(n):
        for b in range(a + 1, n):
            try:
                r = pearson_corr(matrix.scores[:, a], matrix.scores[:, b])
            except MetricError:
                pair = (matrix.systems[a], matrix.systems[b])
                logger.warning("Correlation undefined for %s / %s (constant scores)", *pair)
                undefined.append(pair)
                r = float("nan")
            values[a, b] = values[b, a] = r
    return CorrelationMatrix(list(matrix.systems), values, tuple(undefined))


def evaluate(scores: Scores, operating_pct: float = 1.0) -> MetricsReport:
    """Compute the five summary metrics of one score collection.

    An undefined Cohen's d is reported as NaN instead of failing the report.
    """
    samples = ScoreSamples.of(scores)
    try:
        d = cohens_d(samples)
    except MetricError as e:
        logger.warning("%s; reporting NaN", e)
        d = float("nan")
    return MetricsReport(
        auc_pct=auc(samples),
        eer_pct=eer(samples),
        cohens_d=d,
        fmr_at_fnmr1_pct=error_at_operating_point(samples, FNMR, operating_pct).error_pct,
        fnmr_at_fmr1_pct=error_at_operating_point(samples, FMR, operating_pct).error_pct,
        n_genuine=int(samples.genuine.size),
        n_impostor=int(samples.impostor.size),
    )


def mean_report(reports: Sequence[MetricsReport]) -> Optional[MetricsReport]:
    """Unweighted mean of each metric; trial counts are summed.

    An undefined (NaN) metric is left out of its own mean; the number of runs
    left out is logged.
    """
    if not reports:
        return None
    columns = np.array([report.as_row() for report in reports], dtype=np.float64)
    for name, column in zip(REPORT_FIELDS, columns.T):
        undefined = int(np.isnan(column).sum())
        if undefined:
            logger.warning(
                "%s undefined in %d of %d runs; averaged over the remaining runs",
                name,
                undefined,
                len(reports),
            )
    means = [
        float(np.nanmean(column)) if not np.all(np.isnan(column)) else float("nan")
        for column in columns.T
    ]
    return MetricsReport(
        auc_pct=means[0],
        eer_pct=means[1],
        cohens_d=means[2],
        fmr_at_fnmr1_pct=means[3],
        fnmr_at_fmr1_pct=means[4],
        n_genuine=sum(report.n_genuine for report in reports),
        n_impostor=sum(report.n_impostor for report in reports),
    )
