"""Experiment protocols: settings, partitioning, synthetic scores and aggregation."""

from .config import (
    AGGREGATIONS,
    CROSS,
    INTRA,
    MACRO,
    POOLED,
    PROTOCOLS,
    ExperimentConfig,
    load_config,
    read_key_values,
)
from .experiment import (
    METRIC_NAMES,
    AggregateReport,
    BestMethods,
    Evaluation,
    ExperimentResult,
    aggregate,
    best_methods,
    run_cross,
    run_experiment,
    run_intra,
)
from .settings import (
    CAMERA_IDS,
    CATEGORIES,
    CROSS_BOTH,
    CROSS_CAMERA,
    CROSS_DISTANCE,
    DISTANCES_M,
    SETTING_IDS,
    SETTINGS,
    Partition,
    SettingDescriptor,
    classify_pair,
    cross_pairs,
    filter_pairs,
    partition_identities,
)
from .synth import (
    SynthGenParams,
    SystemParams,
    analytic_auc,
    calibrate_genuine_mean,
    expected_pcc,
    load_params,
    simulate,
    synth_score_matrix,
    synth_scores,
)

__all__ = [
    "AGGREGATIONS",
    "CROSS",
    "INTRA",
    "MACRO",
    "POOLED",
    "PROTOCOLS",
    "ExperimentConfig",
    "load_config",
    "read_key_values",
    "METRIC_NAMES",
    "AggregateReport",
    "BestMethods",
    "Evaluation",
    "ExperimentResult",
    "aggregate",
    "best_methods",
    "run_cross",
    "run_experiment",
    "run_intra",
    "CAMERA_IDS",
    "CATEGORIES",
    "CROSS_BOTH",
    "CROSS_CAMERA",
    "CROSS_DISTANCE",
    "DISTANCES_M",
    "SETTING_IDS",
    "SETTINGS",
    "Partition",
    "SettingDescriptor",
    "classify_pair",
    "cross_pairs",
    "filter_pairs",
    "partition_identities",
    "SynthGenParams",
    "SystemParams",
    "analytic_auc",
    "calibrate_genuine_mean",
    "expected_pcc",
    "load_params",
    "simulate",
    "synth_score_matrix",
    "synth_scores",
]
