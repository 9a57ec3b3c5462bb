"""Correlated synthetic verification scores for desk-scale experiments.

Systems share one latent standard normal factor per trial (a one-factor
Gaussian copula). Raw values are squashed into ]0, 1] with the logistic map,
which is the distance-to-probability model applied to the pseudo-distance
``exp(-raw)``; the map is strictly increasing, so rank metrics of the squashed
scores equal those of the raw Gaussian variables.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from ..errors import ConfigError, ValidationError
from ..formats import atomic_write, write_scores
from ..scores import Label, ScoreRecord, ScoreSet
from .config import (
    CROSS,
    INTRA,
    PROTOCOLS,
    ConfigValue,
    parse_int,
    read_key_values,
    split_list,
)
from .settings import SETTING_IDS, SettingDescriptor, cross_pairs, partition_identities

logger = logging.getLogger(__name__)

SCORE_FLOOR = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class SystemParams:
    """Class-conditional Gaussian of one system's raw scores."""

    system_id: str
    genuine_mean: float
    genuine_std: float
    impostor_mean: float
    impostor_std: float

    def __post_init__(self):
        if not self.system_id or "." in self.system_id or "," in self.system_id:
            raise ValidationError(f"system id {self.system_id!r} must be non-empty without . or ,")
        if not (self.genuine_std > 0 and self.impostor_std > 0):
            raise ValidationError(f"{self.system_id}: standard deviations must be positive")
        for value in (self.genuine_mean, self.impostor_mean, self.genuine_std, self.impostor_std):
            if not math.isfinite(value):
                raise ValidationError(f"{self.system_id}: parameters must be finite")

    @property
    def analytic_auc(self) -> float:
        return analytic_auc(
            self.genuine_mean, self.genuine_std, self.impostor_mean, self.impostor_std
        )


@dataclass
class SynthGenParams:
    """Parameters of the synthetic score generator.

    Attributes:
        systems: One SystemParams per system.
        rho: Share of variance carried by the latent factor, in [0, 1).
        n_genuine: Genuine trials per setting.
        n_impostor: Impostor trials per setting.
        seed: Master seed.
        n_identities: Size of the identity universe; trials use its test split.
        settings: Settings to generate.
        protocol: ``intra`` (train = test) or ``cross`` (every ordered pair).
    """

    systems: List[SystemParams]
    rho: float = 0.15
    n_genuine: int = 2000
    n_impostor: int = 2000
    seed: int = 0
    n_identities: int = 130
    settings: List[str] = field(default_factory=lambda: ["cam1_d1"])
    protocol: str = INTRA

    def __post_init__(self):
        if not self.systems:
            raise ConfigError("at least one system is required")
        ids = [system.system_id for system in self.systems]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"system ids must be distinct, got {ids}")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError(f"rho must lie in [0, 1), got {self.rho}")
        if self.n_genuine < 2 or self.n_impostor < 2:
            raise ConfigError("n_genuine and n_impostor must be at least 2")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {', '.join(PROTOCOLS)}")
        if not self.settings:
            raise ConfigError("at least one setting is required")
        for setting in self.settings:
            SettingDescriptor.parse(setting)
        if self.protocol == CROSS and len(set(self.settings)) < 2:
            raise ConfigError("cross protocol needs at least 2 settings")

    @property
    def n_systems(self) -> int:
        return len(self.systems)

    def runs(self) -> List[Tuple[str, str]]:
        """(train, test) setting pairs to generate, in order."""
        if self.protocol == CROSS:
            return cross_pairs(self.settings)
        return [(setting, setting) for setting in sorted(set(self.settings))]


def analytic_auc(
    genuine_mean: float, genuine_std: float, impostor_mean: float, impostor_std: float
) -> float:
    """AUC of two Gaussian score classes, as a fraction."""
    return float(
        norm.cdf((genuine_mean - impostor_mean) / math.hypot(genuine_std, impostor_std))
    )


def calibrate_genuine_mean(
    target_auc: float,
    genuine_std: float = 1.0,
    impostor_mean: float = 0.0,
    impostor_std: float = 1.0,
) -> float:
    """Genuine mean giving ``target_auc`` (a fraction in (0, 1))."""
    if not (0.0 < target_auc < 1.0):
        raise ValidationError(f"target AUC must lie in (0, 1), got {target_auc}")
    return float(impostor_mean + math.hypot(genuine_std, impostor_std) * norm.ppf(target_auc))


def expected_pcc(
    a: SystemParams, b: SystemParams, rho: float, genuine_fraction: float = 0.5
) -> float:
    """Pearson correlation of two systems' raw scores pooled over both classes.

    Within a class the correlation is ``rho``; the class mean shift adds a
    between-class term weighted by ``genuine_fraction``.
    """
    p = genuine_fraction
    q = 1.0 - p
    shift_a = a.genuine_mean - a.impostor_mean
    shift_b = b.genuine_mean - b.impostor_mean
    covariance = (
        rho * (p * a.genuine_std * b.genuine_std + q * a.impostor_std * b.impostor_std)
        + p * q * shift_a * shift_b
    )
    var_a = p * a.genuine_std**2 + q * a.impostor_std**2 + p * q * shift_a**2
    var_b = p * b.genuine_std**2 + q * b.impostor_std**2 + p * q * shift_b**2
    return float(covariance / math.sqrt(var_a * var_b))


def squash(raw: np.ndarray) -> np.ndarray:
    """Map raw values into ]0, 1] with the logistic function."""
    return np.maximum(expit(raw), SCORE_FLOOR)


def _rng(params: SynthGenParams, stream: Optional[int]) -> np.random.Generator:
    if stream is None:
        return np.random.default_rng(params.seed)
    return np.random.default_rng(np.random.SeedSequence([params.seed, stream]))


def synth_score_matrix(
    params: SynthGenParams, stream: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw labels and squashed scores for every trial and system.

    Args:
        params: Generator parameters.
        stream: Independent sub-stream of ``params.seed`` (one per setting).

    Returns:
        ``(genuine, scores)``: a boolean array with the genuine trials first,
        and a (trials, systems) array of scores in ]0, 1].
    """
    rng = _rng(params, stream)
    n = params.n_genuine + params.n_impostor
    genuine = np.zeros(n, dtype=bool)
    genuine[: params.n_genuine] = True

    latent = rng.standard_normal(n)
    noise = rng.standard_normal((n, params.n_systems))
    shared = math.sqrt(params.rho) * latent[:, np.newaxis]
    factor = shared + math.sqrt(1.0 - params.rho) * noise

    means = np.array(
        [[s.genuine_mean for s in params.systems], [s.impostor_mean for s in params.systems]]
    )
    stds = np.array(
        [[s.genuine_std for s in params.systems], [s.impostor_std for s in params.systems]]
    )
    row = np.where(genuine, 0, 1)
    raw = means[row] + stds[row] * factor
    return genuine, squash(raw)


def trial_subjects(params: SynthGenParams) -> List[str]:
    """Test identities of the synthetic universe, sorted."""
    universe = [f"s{k:04d}" for k in range(params.n_identities)]
    test_ids = sorted(partition_identities(universe, params.seed).test_ids)
    if len(test_ids) < 2:
        raise ConfigError(
            f"n_identities = {params.n_identities} leaves fewer than 2 test identities"
        )
    return test_ids


def _trial_keys(params: SynthGenParams) -> List[Tuple[str, str, str]]:
    subjects = trial_subjects(params)
    s = len(subjects)
    keys = []
    for i in range(params.n_genuine):
        subject = subjects[i % s]
        keys.append((subject, subject, f"p{i // s:04d}"))
    pairs = s * (s - 1)
    for i in range(params.n_impostor):
        p = i % pairs
        reference, offset = divmod(p, s - 1)
        probe = offset if offset < reference else offset + 1
        keys.append((subjects[reference], subjects[probe], f"p{i // pairs:04d}"))
    return keys


def synth_scores(
    params: SynthGenParams, setting_id: Optional[str] = None, stream: Optional[int] = None
) -> List[ScoreSet]:
    """Generate one ScoreSet per system with identical trial keys.

    Args:
        params: Generator parameters.
        setting_id: Setting written on every record (first configured setting
            by default).
        stream: Independent sub-stream of ``params.seed``.

    Returns:
        ScoreSets in ``params.systems`` order; deterministic under the seed.
    """
    setting_id = setting_id or params.settings[0]
    genuine, scores = synth_score_matrix(params, stream)
    keys = _trial_keys(params)
    sets = []
    for column, system in enumerate(params.systems):
        records = [
            ScoreRecord(
                system_id=system.system_id,
                setting_id=setting_id,
                reference_subject=reference,
                probe_subject=probe,
                probe_sample=sample,
                label=Label.GENUINE if is_genuine else Label.IMPOSTOR,
                score=float(score),
            )
            for (reference, probe, sample), is_genuine, score in zip(
                keys, genuine, scores[:, column]
            )
        ]
        sets.append(ScoreSet(records, system_id=system.system_id, setting_filter=setting_id))
    logger.debug("Generated %d trials x %d systems for %s", len(keys), len(sets), setting_id)
    return sets


# Parameter files

_PER_SYSTEM_KEYS = ("genuine_mean", "genuine_std", "impostor_mean", "impostor_std", "target_auc")
_SCALAR_KEYS = ("rho", "n_genuine", "n_impostor", "seed", "n_identities", "settings", "protocol")


def _real_list(value: ConfigValue, key: str, n: int, path: Path) -> List[float]:
    items = split_list(value.text)
    try:
        numbers = [float(item) for item in items]
    except ValueError:
        raise ConfigError(
            f"{key} must be a list of numbers, got {value.text!r}", path=path, line=value.line
        )
    if len(numbers) == 1:
        return numbers * n
    if len(numbers) != n:
        raise ConfigError(
            f"{key} needs 1 or {n} values, got {len(numbers)}", path=path, line=value.line
        )
    return numbers


def load_params(path: Union[str, Path]) -> SynthGenParams:
    """Read a simulation parameter file.

    Systems come from ``systems = a, b, c`` or ``n_systems = N`` (ids
    ``sys1`` .. ``sysN``). Per-system keys take one value per system or a single
    shared value; ``target_auc`` calibrates the genuine mean instead of
    ``genuine_mean``. ``settings = all`` selects the 15 acquisition settings.
    """
    path = Path(path)
    values = read_key_values(path)
    for key, value in values.items():
        if key not in _PER_SYSTEM_KEYS + _SCALAR_KEYS + ("systems", "n_systems"):
            raise ConfigError(f"unknown key {key!r}", path=path, line=value.line)

    if "systems" in values and "n_systems" in values:
        raise ConfigError("give either systems or n_systems, not both", path=path)
    if "systems" in values:
        ids = split_list(values["systems"].text)
    else:
        n = parse_int(values.get("n_systems", ConfigValue("3", 0)), "n_systems", path, minimum=1)
        ids = [f"sys{k}" for k in range(1, n + 1)]
    if not ids:
        raise ConfigError("no systems given", path=path)

    if "target_auc" in values and "genuine_mean" in values:
        raise ConfigError("give either target_auc or genuine_mean, not both", path=path)
    columns: Dict[str, List[float]] = {}
    defaults = {"genuine_std": "1", "impostor_mean": "0", "impostor_std": "1", "target_auc": "0.77"}
    for key in ("genuine_std", "impostor_mean", "impostor_std"):
        value = values.get(key, ConfigValue(defaults[key], 0))
        columns[key] = _real_list(value, key, len(ids), path)
    if "genuine_mean" in values:
        columns["genuine_mean"] = _real_list(values["genuine_mean"], "genuine_mean", len(ids), path)
    else:
        value = values.get("target_auc", ConfigValue(defaults["target_auc"], 0))
        targets = _real_list(value, "target_auc", len(ids), path)
        try:
            columns["genuine_mean"] = [
                calibrate_genuine_mean(target, gs, im, is_)
                for target, gs, im, is_ in zip(
                    targets,
                    columns["genuine_std"],
                    columns["impostor_mean"],
                    columns["impostor_std"],
                )
            ]
        except ValidationError as e:
            raise ConfigError(e.message, path=path, line=value.line)

    options: dict = {}
    if "rho" in values:
        try:
            options["rho"] = float(values["rho"].text)
        except ValueError:
            raise ConfigError("rho must be a number", path=path, line=values["rho"].line)
    for key, minimum in (("n_genuine", 2), ("n_impostor", 2), ("n_identities", 3), ("seed", None)):
        if key in values:
            options[key] = parse_int(values[key], key, path, minimum=minimum)
    if "settings" in values:
        text = values["settings"].text
        options["settings"] = list(SETTING_IDS) if text == "all" else split_list(text)
    if "protocol" in values:
        options["protocol"] = values["protocol"].text

    try:
        systems = [
            SystemParams(
                system_id,
                columns["genuine_mean"][k],
                columns["genuine_std"][k],
                columns["impostor_mean"][k],
                columns["impostor_std"][k],
            )
            for k, system_id in enumerate(ids)
        ]
        return SynthGenParams(systems=systems, **options)
    except ValidationError as e:
        raise ConfigError(e.message, path=path)


def score_file_name(system_id: str, train_setting: str, test_setting: str) -> str:
    return f"{system_id}__{train_setting}__{test_setting}.csv"


def simulate(params: SynthGenParams, out_dir: Union[str, Path]) -> Path:
    """Write synthetic score files and a ready-to-run experiment config.

    Each (train, test) run draws from its own sub-stream of the master seed.

    Returns:
        Path of the written ``experiment.cfg``.
    """
    out_dir = Path(out_dir)
    score_dir = out_dir / "scores"
    lines = [
        "# generated by face-fusion-eval simulate",
        f"protocol = {params.protocol}",
        "aggregation = macro",
        "fusion = avg, min, max",
        f"seed = {params.seed}",
        "output = report",
    ]
    for index, (train, test) in enumerate(params.runs()):
        for score_set, system in zip(synth_scores(params, test, stream=index), params.systems):
            name = score_file_name(system.system_id, train, test)
            write_scores(score_dir / name, score_set)
            lines.append(f"scores.{system.system_id}.{train}.{test} = scores/{name}")
    config_path = out_dir / "experiment.cfg"
    with atomic_write(config_path) as handle:
        handle.write("\n".join(lines) + "\n")
    logger.info(
        "Simulated %d systems over %d runs into %s",
        params.n_systems,
        len(params.runs()),
        out_dir,
    )
    return config_path
