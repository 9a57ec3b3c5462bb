"""Flat ``key = value`` parameter files and the experiment configuration."""

import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..errors import ConfigError, ExperimentError, ValidationError
from ..fusion import RULES
from .settings import SettingDescriptor

logger = logging.getLogger(__name__)

INTRA = "intra"
CROSS = "cross"
PROTOCOLS = (INTRA, CROSS)
MACRO = "macro"
POOLED = "pooled"
AGGREGATIONS = (MACRO, POOLED)

DEFAULT_OUTPUT = "report"

_SECTION = "parameters"

RunKey = Tuple[str, str, str]


@dataclass(frozen=True)
class ConfigValue:
    """A raw value and the line it was read from."""

    text: str
    line: int


def read_key_values(path: Union[str, Path]) -> Dict[str, ConfigValue]:
    """Parse a flat ``key = value`` file.

    ``#`` starts a comment, blank lines are ignored and keys are case-sensitive.

    Raises:
        ConfigError: On section headers, lines without ``=`` or repeated keys,
            naming the offending line.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError("file not found", path=path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError("file is not valid UTF-8 text", path=path)

    parser = configparser.ConfigParser(
        interpolation=None,
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        empty_lines_in_values=False,
        default_section="__defaults__",
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=str(path))
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"key {e.option!r} given more than once", path=path, line=_line(e.lineno))
    except configparser.DuplicateSectionError as e:
        raise ConfigError("section headers are not allowed", path=path, line=_line(e.lineno))
    except configparser.ParsingError as e:
        line, content = e.errors[0]
        raise ConfigError(f"expected 'key = value', got {content}", path=path, line=_line(line))
    if parser.sections() != [_SECTION]:
        raise ConfigError("section headers are not allowed", path=path)

    lines: Dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        if "=" in content and not raw[:1].isspace():
            lines.setdefault(content.split("=", 1)[0].strip(), number)
    return {
        key: ConfigValue(value.strip(), lines.get(key, 0))
        for key, value in parser.items(_SECTION, raw=True)
    }


def _line(lineno: Optional[int]) -> Optional[int]:
    # one header line is prepended before parsing
    return None if lineno is None else max(lineno - 1, 1)


def split_list(text: str) -> List[str]:
    """Split a comma separated value, dropping empty items."""
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_int(value: ConfigValue, key: str, path: Path, minimum: Optional[int] = None) -> int:
    try:
        number = int(value.text)
    except ValueError:
        raise ConfigError(
            f"{key} must be an integer, got {value.text!r}", path=path, line=value.line
        )
    if minimum is not None and number < minimum:
        raise ConfigError(
            f"{key} must be at least {minimum}, got {number}", path=path, line=value.line
        )
    return number


@dataclass
class ExperimentConfig:
    """Everything an intra- or cross-setting experiment needs.

    Attributes:
        protocol: ``intra`` or ``cross``.
        score_files: Score CSV per (system, train setting, test setting).
        fusion_rules: Rule names applied to every fusion group.
        aggregation: ``macro`` (mean of per-run metrics) or ``pooled``.
        baseline: Optional system evaluated and reported but never fused.
        fusion_groups: Named families of systems fused together.
        seed: Seed recorded with the run.
        output: Directory the reports are written to.
        threads: Number of runs evaluated concurrently.
    """

    protocol: str
    score_files: Dict[RunKey, Path]
    fusion_rules: List[str] = field(default_factory=lambda: list(RULES))
    aggregation: str = MACRO
    baseline: Optional[str] = None
    fusion_groups: Dict[str, List[str]] = field(default_factory=dict)
    seed: int = 0
    output: Path = Path(DEFAULT_OUTPUT)
    threads: int = 1
    source: Optional[Path] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check protocol invariants and cross references between keys."""
        if self.protocol not in PROTOCOLS:
            raise ConfigError(
                f"protocol must be one of {', '.join(PROTOCOLS)}, got {self.protocol!r}"
            )
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(
                f"aggregation must be one of {', '.join(AGGREGATIONS)}, got {self.aggregation!r}"
            )
        for rule in self.fusion_rules:
            if rule not in RULES:
                raise ConfigError(f"unknown fusion rule {rule!r}; choose from {', '.join(RULES)}")
        if len(set(self.fusion_rules)) != len(self.fusion_rules):
            raise ConfigError(f"fusion rules repeat: {self.fusion_rules}")
        if not self.score_files:
            raise ConfigError("no scores.<system>.<train>.<test> entries given")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")

        for system, train, test in self.score_files:
            if self.protocol == INTRA and train != test:
                raise ConfigError(
                    f"intra protocol requires train setting = test setting, "
                    f"got scores.{system}.{train}.{test}"
                )
            if self.protocol == CROSS and train == test:
                raise ConfigError(
                    f"cross protocol requires train setting != test setting, "
                    f"got scores.{system}.{train}.{test}"
                )

        systems = self.systems()
        if self.baseline is not None and self.baseline not in {key[0] for key in self.score_files}:
            raise ConfigError(f"baseline system {self.baseline!r} has no score files")
        for name, members in self.fusion_groups.items():
            if len(set(members)) < 2:
                raise ConfigError(f"fusion group {name!r}: fusion requires ≥ 2 systems")
            for member in members:
                if member == self.baseline:
                    raise ConfigError(f"fusion group {name!r} includes the baseline {member!r}")
                if member not in systems:
                    raise ConfigError(f"fusion group {name!r} names unknown system {member!r}")

    def systems(self) -> List[str]:
        """Fusable systems, baseline excluded, sorted."""
        return sorted({key[0] for key in self.score_files} - {self.baseline})

    def all_systems(self) -> List[str]:
        """Baseline first (if any), then the fusable systems."""
        return ([self.baseline] if self.baseline else []) + self.systems()

    def runs(self) -> List[Tuple[str, str]]:
        """Every (train setting, test setting) pair with at least one score file."""
        return sorted({(train, test) for _, train, test in self.score_files})

    def groups(self) -> Dict[str, List[str]]:
        """Fusion groups; a single group of every system when none are configured."""
        if self.fusion_groups:
            return {
                name: sorted(set(members)) for name, members in sorted(self.fusion_groups.items())
            }
        systems = self.systems()
        return {"all": systems} if len(systems) >= 2 else {}

    def check_inputs(self) -> None:
        """Require a readable score file for every system of every run.

        Raises:
            ExperimentError: Listing every missing key and file.
        """
        missing = []
        for train, test in self.runs():
            for system in self.all_systems():
                key = (system, train, test)
                if key not in self.score_files:
                    missing.append(f"scores.{system}.{train}.{test} (not configured)")
                elif not self.score_files[key].is_file():
                    missing.append(f"scores.{system}.{train}.{test} ({self.score_files[key]})")
        if missing:
            raise ExperimentError(
                f"{len(missing)} score files missing:\n  " + "\n  ".join(missing),
                path=self.source,
            )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment configuration file.

    Relative paths are resolved against the directory of the file.

    Raises:
        ConfigError: On unknown keys, malformed values or protocol violations,
            naming the offending line.
    """
    path = Path(path)
    values = read_key_values(path)
    base = path.parent
    score_files: Dict[RunKey, Path] = {}
    score_lines: Dict[RunKey, int] = {}
    groups: Dict[str, List[str]] = {}
    options: dict = {}

    for key, value in values.items():
        if key.startswith("scores."):
            parts = key.split(".")
            if len(parts) != 4 or not all(parts[1:]):
                raise ConfigError(
                    f"score key must be scores.<system>.<train>.<test>, got {key!r}",
                    path=path,
                    line=value.line,
                )
            _, system, train, test = parts
            for setting in (train, test):
                try:
                    SettingDescriptor.parse(setting)
                except ValidationError as e:
                    raise ConfigError(e.message, path=path, line=value.line)
            if not value.text:
                raise ConfigError(f"{key} needs a file path", path=path, line=value.line)
            score_files[(system, train, test)] = _resolve(base, value.text)
            score_lines[(system, train, test)] = value.line
        elif key.startswith("fusion_group."):
            name = key[len("fusion_group.") :]
            if not name:
                raise ConfigError("fusion group needs a name", path=path, line=value.line)
            groups[name] = split_list(value.text)
        elif key == "protocol":
            options["protocol"] = value.text
        elif key == "aggregation":
            options["aggregation"] = value.text
        elif key == "fusion":
            options["fusion_rules"] = split_list(value.text)
        elif key == "baseline":
            options["baseline"] = value.text or None
        elif key == "seed":
            options["seed"] = parse_int(value, key, path)
        elif key == "threads":
            options["threads"] = parse_int(value, key, path, minimum=1)
        elif key == "output":
            options["output"] = _resolve(base, value.text)
        else:
            raise ConfigError(f"unknown key {key!r}", path=path, line=value.line)

    if "protocol" not in options:
        raise ConfigError("missing required key 'protocol'", path=path)
    for (_, train, test), line in score_lines.items():
        if options["protocol"] == INTRA and train != test:
            raise ConfigError(
                f"intra protocol requires train setting = test setting, got {train} -> {test}",
                path=path,
                line=line,
            )
        if options["protocol"] == CROSS and train == test:
            raise ConfigError(
                f"cross protocol requires train setting != test setting, got {train} -> {test}",
                path=path,
                line=line,
            )
    if "output" not in options:
        options["output"] = base / DEFAULT_OUTPUT
    try:
        config = ExperimentConfig(
            score_files=score_files, fusion_groups=groups, source=path, **options
        )
    except ConfigError as e:
        raise ConfigError(e.message, path=path)
    logger.info(
        "Loaded %s experiment with %d systems over %d runs",
        config.protocol,
        len(config.all_systems()),
        len(config.runs()),
    )
    return config


def _resolve(base: Path, text: str) -> Path:
    candidate = Path(text).expanduser()
    return candidate if candidate.is_absolute() else base / candidate
