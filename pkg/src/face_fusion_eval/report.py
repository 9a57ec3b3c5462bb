"""Report tables (CSV) and charts (SVG) for evaluations and experiments."""

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib
from matplotlib.figure import Figure

from .errors import FormatError, ValidationError
from .formats import atomic_path, format_real, parse_real, read_csv, write_csv
from .harness.config import INTRA
from .harness.experiment import (
    METRIC_NAMES,
    AggregateReport,
    BestMethods,
    Evaluation,
    ExperimentResult,
)
from .harness.settings import DISTANCES_M
from .metrics import CorrelationMatrix, MetricsReport, RocCurve

logger = logging.getLogger(__name__)

matplotlib.use("Agg")
matplotlib.rcParams.update({"svg.hashsalt": "face-fusion-eval", "axes.unicode_minus": False})

PathLike = Union[str, Path]

METRIC_LABELS = {
    "auc_pct": "AUC (%)",
    "eer_pct": "EER (%)",
    "cohens_d": "Cohen's d",
    "fmr_at_fnmr1": "FMR @ FNMR = 1% (%)",
    "fnmr_at_fmr1": "FNMR @ FMR = 1% (%)",
}
BEST_HEADER = ["metric", "best_single", "best_single_value", "best_fusion", "best_fusion_value"]
ROC_POINTS_HEADER = ["threshold", "fmr", "fnmr"]

Row = Tuple[Tuple[str, ...], Tuple[float, ...]]


@dataclass
class ReportTable:
    """Rows of key cells followed by the five metric values.

    The first key column is the method; the remaining ones (setting, distance,
    category, ...) break it down.
    """

    key_columns: Tuple[str, ...]
    rows: List[Row]

    def __post_init__(self):
        self.key_columns = tuple(self.key_columns)
        if not self.key_columns:
            raise ValidationError("a report table needs at least one key column")
        for keys, values in self.rows:
            if len(keys) != len(self.key_columns) or len(values) != len(METRIC_NAMES):
                raise ValidationError(f"row {keys} does not match the table columns")

    @property
    def header(self) -> List[str]:
        return list(self.key_columns) + list(METRIC_NAMES)

    @classmethod
    def from_reports(
        cls, key_columns: Sequence[str], items: Iterable[Tuple[Sequence[str], MetricsReport]]
    ) -> "ReportTable":
        return cls(
            tuple(key_columns),
            [(tuple(keys), tuple(report.as_row())) for keys, report in items],
        )

    def column(self, metric: str) -> List[float]:
        index = METRIC_NAMES.index(metric)
        return [values[index] for _, values in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def write_report_csv(table: ReportTable, path: PathLike) -> Path:
    """Write a report table; reals use 9 significant digits."""
    rows = (list(keys) + [format_real(value) for value in values] for keys, values in table.rows)
    return write_csv(path, table.header, rows)


def read_report_csv(path: PathLike) -> ReportTable:
    """Read a table written by :func:`write_report_csv`."""
    path = Path(path)
    entries = read_csv(path)
    with open(path, newline="", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split(",")
    n_keys = len(header) - len(METRIC_NAMES)
    if n_keys < 1 or tuple(header[n_keys:]) != METRIC_NAMES:
        raise FormatError(
            f"header must end with {','.join(METRIC_NAMES)}, got {','.join(header)}",
            path=path,
            line=1,
        )
    key_columns = tuple(header[:n_keys])
    rows = []
    for entry in entries:
        line = entry["__line__"]
        keys = tuple(entry[column] for column in key_columns)
        values = tuple(parse_real(entry[metric], path, line, metric) for metric in METRIC_NAMES)
        rows.append((keys, values))
    return ReportTable(key_columns, rows)


def _gid(*parts: object) -> str:
    return "-".join(re.sub(r"[^A-Za-z0-9_.]", "_", str(part)) for part in parts)


def render_bar_chart(
    table: ReportTable, path: PathLike, metric: str = "auc_pct", title: Optional[str] = None
) -> Path:
    """Grouped bar chart: one group per method, one bar per breakdown key.

    Each bar carries the SVG id ``bar-<group>-<bar>``.
    """
    if not table.rows:
        raise ValidationError("cannot chart an empty report table")
    index = METRIC_NAMES.index(metric)

    groups: Dict[str, List[Row]] = {}
    for row in table.rows:
        groups.setdefault(row[0][0], []).append(row)
    series = list(dict.fromkeys(" / ".join(keys[1:]) for keys, _ in table.rows))
    width = 0.8 / max(len(rows) for rows in groups.values())

    figure = Figure(figsize=(max(6.0, 1.2 * len(groups)), 4.0), constrained_layout=True)
    ax = figure.subplots()
    colors = matplotlib.colormaps["tab20"]
    labelled = set()
    for g, (method, rows) in enumerate(groups.items()):
        for j, (keys, values) in enumerate(rows):
            name = " / ".join(keys[1:])
            value = values[index]
            bar = ax.bar(
                g - 0.4 + (j + 0.5) * width,
                0.0 if math.isnan(value) else value,
                width=width,
                color=colors(series.index(name) % 20),
                label=name if name and name not in labelled else None,
            )
            labelled.add(name)
            bar.patches[0].set_gid(_gid("bar", g, j))
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(list(groups), rotation=30, ha="right", fontsize=7)
    ax.set_ylabel(METRIC_LABELS[metric])
    if title:
        ax.set_title(title)
    if any(series):
        ax.legend(fontsize=6, ncol=3)
    ax.grid(axis="y", alpha=0.3)

    with atomic_path(path) as temp:
        figure.savefig(temp, format="svg", metadata={"Date": None})
    return Path(path)


def render_report(
    table: ReportTable,
    csv_path: PathLike,
    svg_path: Optional[PathLike] = None,
    metric: str = "auc_pct",
    title: Optional[str] = None,
) -> List[Path]:
    """Write a report table as CSV and, optionally, as an SVG bar chart.

    Raises:
        ValidationError: For an empty table.
    """
    if not table.rows:
        raise ValidationError("cannot render an empty report table")
    written = [write_report_csv(table, csv_path)]
    if svg_path is not None:
        written.append(render_bar_chart(table, svg_path, metric, title))
    return written


def summary_table(summary: AggregateReport) -> ReportTable:
    return ReportTable.from_reports(("method",), (((m,), r) for m, r in summary.rows.items()))


def per_run_table(evaluations: Sequence[Evaluation], protocol: str) -> ReportTable:
    """Per-setting (intra) or per-pair (cross) breakdown, grouped by method."""
    order = list(dict.fromkeys(entry.method for entry in evaluations))
    ranked = sorted(evaluations, key=lambda entry: order.index(entry.method))
    if protocol == INTRA:
        return ReportTable.from_reports(
            ("method", "setting"),
            (((e.method, e.test_setting), e.report) for e in ranked),
        )
    return ReportTable.from_reports(
        ("method", "train_setting", "test_setting"),
        (((e.method, e.train_setting, e.test_setting), e.report) for e in ranked),
    )


def sub_report_table(
    sub_reports: Dict[str, AggregateReport], column: str, labels: Optional[Dict[str, str]] = None
) -> ReportTable:
    """Method x sub-report breakdown, grouped by method."""
    labels = labels or {}
    methods: List[str] = []
    for report in sub_reports.values():
        methods.extend(method for method in report.rows if method not in methods)
    items = [
        ((method, labels.get(name, name)), report.rows[method])
        for method in methods
        for name, report in sub_reports.items()
        if method in report.rows
    ]
    return ReportTable.from_reports(("method", column), items)


def write_best_csv(best: Sequence[BestMethods], path: PathLike) -> Path:
    """Per metric, the best single system and the best fusion."""

    def cells(pick: Optional[Tuple[str, float]]) -> List[str]:
        return [pick[0], format_real(pick[1])] if pick else ["", ""]

    rows = ([entry.metric] + cells(entry.single) + cells(entry.fusion) for entry in best)
    return write_csv(path, BEST_HEADER, rows)


def write_correlation_csv(matrix: CorrelationMatrix, path: PathLike) -> Path:
    """Square PCC matrix with a leading system column."""
    rows = (
        [system] + [format_real(value) for value in matrix.values[i]]
        for i, system in enumerate(matrix.systems)
    )
    return write_csv(path, ["system"] + list(matrix.systems), rows)


def write_roc_points(curve: RocCurve, path: PathLike) -> Path:
    rows = (
        [format_real(t), format_real(fmr), format_real(fnmr)] for t, fmr, fnmr in curve.points
    )
    return write_csv(path, ROC_POINTS_HEADER, rows)


def render_roc(curve: RocCurve, path: PathLike, title: Optional[str] = None) -> Path:
    """ROC curve as FMR against 1 - FNMR, in percent."""
    figure = Figure(figsize=(4.5, 4.5), constrained_layout=True)
    ax = figure.subplots()
    ax.plot(100.0 * curve.fmr, 100.0 * (1.0 - curve.fnmr), drawstyle="steps-post", lw=1.2)
    ax.plot([0, 100], [0, 100], ls="--", lw=0.6, color="grey")
    ax.set_xlabel("FMR (%)")
    ax.set_ylabel("1 - FNMR (%)")
    ax.set_xlim(0, 100)
    ax.set_ylim(0, 100)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title, fontsize=9)
    with atomic_path(path) as temp:
        figure.savefig(temp, format="svg", metadata={"Date": None})
    return Path(path)


def write_experiment_reports(result: ExperimentResult, out_dir: PathLike) -> List[Path]:
    """Write every table and chart of an experiment into ``out_dir``.

    Returns:
        The written paths, in writing order.
    """
    out_dir = Path(out_dir)
    protocol = result.protocol
    written: List[Path] = []

    written += render_report(
        summary_table(result.summary),
        out_dir / f"{protocol}_summary.csv",
        out_dir / f"{protocol}_summary.svg",
        title=f"{protocol} average ({result.summary.mode})",
    )
    written.append(write_best_csv(result.best(), out_dir / f"{protocol}_summary_best.csv"))
    written.append(
        write_csv(
            out_dir / f"{protocol}_metadata.csv",
            ["key", "value"],
            [
                ["protocol", protocol],
                ["aggregation", result.summary.mode],
                ["runs", str(result.summary.n_runs)],
                ["methods", str(len(result.summary.rows))],
                ["seed", str(result.config.seed)],
            ],
        )
    )

    per_run = per_run_table(result.evaluations, protocol)
    if protocol == INTRA:
        written += render_report(
            per_run,
            out_dir / "intra_per_setting.csv",
            out_dir / "intra_per_setting.svg",
            title="AUC per setting",
        )
        if result.sub_reports:
            distances = {d: format(DISTANCES_M[d], "g") for d in result.sub_reports}
            written += render_report(
                sub_report_table(result.sub_reports, "distance_m", distances),
                out_dir / "intra_per_distance.csv",
                out_dir / "intra_per_distance.svg",
                title="AUC per acquisition distance (m)",
            )
        if result.correlation is not None:
            written.append(write_correlation_csv(result.correlation, out_dir / "correlation.csv"))
    else:
        written += render_report(per_run, out_dir / "cross_per_pair.csv")
        if result.sub_reports:
            written += render_report(
                sub_report_table(result.sub_reports, "category"),
                out_dir / "cross_by_category.csv",
                out_dir / "cross_by_category.svg",
                title="AUC per cross-setting category",
            )
    logger.info("Wrote %d report files to %s", len(written), out_dir)
    return written


def format_summary(summary: AggregateReport) -> str:
    """Fixed-width text rendering of a summary for the console."""
    width = max(len("method"), *(len(method) for method in summary.rows))
    lines = [f"{'method':<{width}}  " + "  ".join(f"{name:>13}" for name in METRIC_NAMES)]
    for method, report in summary.rows.items():
        cells = "  ".join(f"{value:>13.4f}" for value in report.as_row())
        lines.append(f"{method:<{width}}  {cells}")
    return "\n".join(lines)
