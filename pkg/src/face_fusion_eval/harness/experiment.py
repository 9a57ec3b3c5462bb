"""Intra- and cross-setting experiments over per-system score files."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ExperimentError, ValidationError
from ..formats import read_scores
from ..fusion import TrialMatrix, align_trials, get_rule
from ..metrics import (
    CorrelationMatrix,
    MetricsReport,
    ScoreSamples,
    correlation_matrix,
    evaluate,
    mean_report,
)
from ..scores import ScoreSet
from .config import CROSS, INTRA, MACRO, POOLED, ExperimentConfig
from .settings import CATEGORIES, DISTANCES_M, SettingDescriptor, classify_pair

logger = logging.getLogger(__name__)

METRIC_NAMES = ("auc_pct", "eer_pct", "cohens_d", "fmr_at_fnmr1", "fnmr_at_fmr1")
HIGHER_IS_BETTER = {
    "auc_pct": True,
    "eer_pct": False,
    "cohens_d": True,
    "fmr_at_fnmr1": False,
    "fnmr_at_fmr1": False,
}


@dataclass(frozen=True)
class Evaluation:
    """Metrics of one method on one (train setting, test setting) run.

    ``samples`` keeps the scores so runs can be pooled later.
    """

    method: str
    protocol: str
    train_setting: str
    test_setting: str
    report: MetricsReport
    samples: Optional[ScoreSamples] = None

    @property
    def is_fusion(self) -> bool:
        return is_fusion(self.method)


@dataclass
class AggregateReport:
    """One aggregated MetricsReport per method, in method order."""

    mode: str
    protocol: str
    rows: Dict[str, MetricsReport]
    n_runs: int

    def methods(self) -> List[str]:
        return list(self.rows)


@dataclass(frozen=True)
class BestMethods:
    """Best single system and best fusion for one metric (None when absent)."""

    metric: str
    single: Optional[Tuple[str, float]]
    fusion: Optional[Tuple[str, float]]


@dataclass
class ExperimentResult:
    """Everything an experiment produced.

    Attributes:
        config: The configuration that was run.
        evaluations: One entry per (run, method), sorted by run then method.
        summary: Aggregate over every run.
        sub_reports: Intra: one aggregate per acquisition distance id.
            Cross: one aggregate per pair category.
        correlation: Intra only: PCC between systems over the pooled aligned trials.
    """

    config: ExperimentConfig
    evaluations: List[Evaluation]
    summary: AggregateReport
    sub_reports: Dict[str, AggregateReport] = field(default_factory=dict)
    correlation: Optional[CorrelationMatrix] = None

    @property
    def protocol(self) -> str:
        return self.config.protocol

    def best(self) -> List[BestMethods]:
        return best_methods(self.summary, baseline=self.config.baseline)


def is_fusion(method: str) -> bool:
    return method.startswith("fusion:")


def aggregate(entries: Sequence[Evaluation], mode: str = MACRO) -> AggregateReport:
    """Combine per-run evaluations into one row per method.

    Args:
        entries: Evaluations of a single protocol.
        mode: ``macro`` averages each metric over runs without weighting;
            ``pooled`` recomputes the metrics over the concatenated scores.

    Returns:
        AggregateReport with methods in order of first appearance.

    Raises:
        ExperimentError: On an empty input, mixed protocols, an unknown mode or
            pooled mode without scores.
    """
    if not entries:
        raise ExperimentError("nothing to aggregate")
    protocols = {entry.protocol for entry in entries}
    if len(protocols) != 1:
        raise ExperimentError(f"cannot aggregate mixed protocols {sorted(protocols)}")
    if mode not in (MACRO, POOLED):
        raise ExperimentError(f"aggregation mode must be {MACRO!r} or {POOLED!r}, got {mode!r}")

    by_method: Dict[str, List[Evaluation]] = {}
    for entry in entries:
        by_method.setdefault(entry.method, []).append(entry)

    rows: Dict[str, MetricsReport] = {}
    for method, group in by_method.items():
        if mode == MACRO:
            report = mean_report([entry.report for entry in group])
        else:
            if any(entry.samples is None for entry in group):
                raise ExperimentError(f"pooled aggregation of {method} needs the raw scores")
            report = evaluate(ScoreSamples.concatenate([entry.samples for entry in group]))
        assert report is not None
        rows[method] = report
    n_runs = len({(entry.train_setting, entry.test_setting) for entry in entries})
    return AggregateReport(mode=mode, protocol=protocols.pop(), rows=rows, n_runs=n_runs)


def best_methods(summary: AggregateReport, baseline: Optional[str] = None) -> List[BestMethods]:
    """Best single system and best fusion per metric.

    The baseline is a reference and never counts as the best single system.
    NaN values are skipped; ties go to the method listed first.
    """
    best = []
    for index, metric in enumerate(METRIC_NAMES):
        sign = 1.0 if HIGHER_IS_BETTER[metric] else -1.0
        picks: Dict[bool, Optional[Tuple[str, float]]] = {False: None, True: None}
        for method, report in summary.rows.items():
            if method == baseline:
                continue
            value = report.as_row()[index]
            if math.isnan(value):
                continue
            current = picks[is_fusion(method)]
            if current is None or sign * value > sign * current[1]:
                picks[is_fusion(method)] = (method, value)
        best.append(BestMethods(metric=metric, single=picks[False], fusion=picks[True]))
    return best


@dataclass
class _RunOutcome:
    evaluations: List[Evaluation]
    matrix: Optional[TrialMatrix]


def _load_run(config: ExperimentConfig, train: str, test: str) -> Dict[str, ScoreSet]:
    sets = {}
    for system in config.all_systems():
        path = config.score_files[(system, train, test)]
        score_set = read_scores(path)
        if score_set.systems() != [system]:
            raise ExperimentError(
                f"expected scores of system {system!r}, file holds {score_set.systems()}",
                path=path,
            )
        if score_set.settings() != [test]:
            score_set = score_set.for_setting(test)
            if len(score_set) == 0:
                raise ExperimentError(f"no trials for test setting {test}", path=path)
        try:
            score_set.require_both_classes()
        except ValidationError as e:
            raise ExperimentError(e.message, path=path)
        sets[system] = score_set
    return sets


def _evaluate_run(config: ExperimentConfig, train: str, test: str) -> _RunOutcome:
    sets = _load_run(config, train, test)
    protocol = config.protocol

    def entry(method: str, scores: ScoreSet) -> Evaluation:
        samples = ScoreSamples.of(scores)
        return Evaluation(method, protocol, train, test, evaluate(samples), samples)

    evaluations = [entry(system, sets[system]) for system in config.all_systems()]
    for members in config.groups().values():
        matrix = align_trials([sets[system] for system in members])
        for rule_name in config.fusion_rules:
            fused = get_rule(rule_name).fuse(matrix)
            evaluations.append(entry(fused.system_id or rule_name, fused))

    systems = config.systems()
    matrix = align_trials([sets[system] for system in systems]) if len(systems) >= 2 else None
    logger.info("Evaluated %s -> %s (%d methods)", train, test, len(evaluations))
    return _RunOutcome(evaluations, matrix)


def _run_all(config: ExperimentConfig) -> List[_RunOutcome]:
    config.check_inputs()
    runs = config.runs()
    if config.threads <= 1:
        return [_evaluate_run(config, train, test) for train, test in runs]
    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        return list(executor.map(lambda run: _evaluate_run(config, *run), runs))


def _pooled_matrix(matrices: Sequence[TrialMatrix]) -> TrialMatrix:
    first = matrices[0]
    return TrialMatrix(
        systems=list(first.systems),
        keys=[key for matrix in matrices for key in matrix.keys],
        labels=np.concatenate([matrix.labels for matrix in matrices]),
        scores=np.vstack([matrix.scores for matrix in matrices]),
    )


def run_intra(config: ExperimentConfig) -> ExperimentResult:
    """Train = test setting for every run.

    Evaluates every single system, the baseline and each fusion rule on each
    setting, aggregates over settings and per acquisition distance, and
    correlates the systems over the pooled aligned trials.

    Raises:
        ExperimentError: When a score file is missing (all missing keys listed).
    """
    if config.protocol != INTRA:
        raise ExperimentError(f"run_intra needs the intra protocol, got {config.protocol!r}")
    outcomes = _run_all(config)
    evaluations = [entry for outcome in outcomes for entry in outcome.evaluations]
    summary = aggregate(evaluations, config.aggregation)

    sub_reports = {}
    for distance_id in DISTANCES_M:
        subset = [
            entry
            for entry in evaluations
            if _distance_of(entry.test_setting) == distance_id
        ]
        if subset:
            sub_reports[distance_id] = aggregate(subset, config.aggregation)

    matrices = [outcome.matrix for outcome in outcomes if outcome.matrix is not None]
    correlation = correlation_matrix(_pooled_matrix(matrices)) if matrices else None
    return ExperimentResult(config, evaluations, summary, sub_reports, correlation)


def _distance_of(setting_id: str) -> Optional[str]:
    try:
        return SettingDescriptor.parse(setting_id).distance_id
    except ValidationError:
        return None


def run_cross(config: ExperimentConfig) -> ExperimentResult:
    """Train and test settings differ for every run.

    Every configured ordered pair is evaluated; the aggregate covers all pairs
    and each category (cross-camera, cross-distance, cross-both) separately.

    Raises:
        ExperimentError: When a score file is missing (all missing keys listed).
    """
    if config.protocol != CROSS:
        raise ExperimentError(f"run_cross needs the cross protocol, got {config.protocol!r}")
    outcomes = _run_all(config)
    evaluations = [entry for outcome in outcomes for entry in outcome.evaluations]
    summary = aggregate(evaluations, config.aggregation)

    sub_reports = {}
    for category in CATEGORIES:
        subset = [
            entry
            for entry in evaluations
            if classify_pair(entry.train_setting, entry.test_setting) == category
        ]
        if subset:
            sub_reports[category] = aggregate(subset, config.aggregation)
    return ExperimentResult(config, evaluations, summary, sub_reports)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch on the configured protocol."""
    if config.protocol == INTRA:
        return run_intra(config)
    return run_cross(config)
