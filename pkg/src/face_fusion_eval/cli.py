"""Command-line interface for the face fusion and evaluation toolkit."""

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import List, NoReturn, Optional, Sequence

from . import __version__
from .errors import ValidationError
from .formats import read_embeddings, read_scores, write_scores
from .fusion import RULES, align_trials, fuse_all
from .harness import POOLED, load_config, load_params, run_experiment, simulate
from .metrics import ScoreSamples, correlation_matrix, evaluate, roc_curve
from .report import (
    ReportTable,
    format_summary,
    render_report,
    render_roc,
    write_correlation_csv,
    write_experiment_reports,
    write_roc_points,
)
from .scores import ScoreSet, score_trials
from .viewsynth import (
    FLAT,
    LAMBERT,
    ORTHOGRAPHIC,
    PERSPECTIVE,
    Camera,
    PoseGridParams,
    enlarge_gallery,
    load_mesh,
    write_gallery,
)

logger = logging.getLogger(__name__)

RULE = "=" * 80

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTERNAL = 2


class UsageError(ValidationError):
    """Bad command-line usage."""


class ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on usage errors."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _announce(args: argparse.Namespace, *lines: str) -> None:
    if not getattr(args, "quiet", False):
        for line in lines:
            print(line)


def _banner(args: argparse.Namespace, title: str) -> None:
    _announce(args, "", RULE, title, RULE)


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_")


def cmd_enlarge(args: argparse.Namespace) -> int:
    """Render the gallery-enlargement views of one mesh."""
    mesh_path = Path(args.mesh)
    if not mesh_path.is_file():
        raise ValidationError("file not found", path=mesh_path)
    try:
        mesh = load_mesh(mesh_path.read_bytes())
    except ValidationError as e:
        raise type(e)(e.message, path=mesh_path, line=e.line)
    params = PoseGridParams(args.max_az, args.max_el, args.offset)
    camera = Camera(
        projection=PERSPECTIVE if args.proj == "persp" else ORTHOGRAPHIC,
        fov_deg=args.fov,
        subject_distance=args.distance,
        image_size=(args.size, args.size),
    )
    views = enlarge_gallery(mesh, params, camera, args.shading, threads=args.threads)
    manifest = write_gallery(views, args.out)
    _announce(
        args, f"✓ Rendered {len(views)} views of {mesh_path.name}", f"✓ Manifest: {manifest}"
    )
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    """Score every reference against every probe."""
    references = read_embeddings(args.references)
    probes = read_embeddings(args.probes)
    scores = score_trials(
        references, probes, args.system, setting_id=args.setting, l2_normalize=args.l2_normalize
    )
    write_scores(args.out, scores)
    _announce(
        args,
        f"✓ Scored {len(scores)} trials ({scores.n_genuine} genuine, "
        f"{scores.n_impostor} impostor)",
        f"✓ Saved to: {args.out}",
    )
    return EXIT_OK


def _load_score_files(paths: Sequence[str]) -> ScoreSet:
    records = []
    for path in paths:
        records.extend(read_scores(path).records)
    return ScoreSet(records)


def cmd_fuse(args: argparse.Namespace) -> int:
    """Fuse the systems found in the input score files."""
    merged = _load_score_files(args.files)
    matrix = align_trials([merged.for_system(system) for system in merged.systems()])
    for system, dropped in matrix.dropped.items():
        if dropped:
            _announce(args, f"⚠ {system}: dropped {dropped} trials missing from another system")
    rules = list(dict.fromkeys(args.rule or ["avg"]))
    fused = fuse_all(matrix, rules)
    write_scores(args.out, fused)
    for score_set in fused:
        _announce(args, f"✓ {score_set.system_id}: {len(score_set)} trials")
    _announce(args, f"✓ Saved to: {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Metrics, ROC plots and optional correlation for score files."""
    merged = _load_score_files(args.files)
    out_dir = Path(args.out_dir)
    items = []
    for system in merged.systems():
        per_system = merged.for_system(system)
        groups = [(setting, per_system.for_setting(setting)) for setting in per_system.settings()]
        if args.pooled and len(groups) > 1:
            groups.append(("all", per_system))
        for setting, scores in groups:
            samples = ScoreSamples.of(scores)
            report = evaluate(samples)
            items.append(((system, setting), report))
            name = _safe_name(f"roc_{system}_{setting}")
            curve = roc_curve(samples)
            render_roc(curve, out_dir / f"{name}.svg", title=f"{system} / {setting}")
            if args.points:
                write_roc_points(curve, out_dir / f"{name}.csv")
            _announce(
                args,
                f"✓ {system} @ {setting}: AUC {report.auc_pct:.1f}  EER {report.eer_pct:.2f}  "
                f"d {report.cohens_d:.3f}",
            )
    table = ReportTable.from_reports(("method", "setting"), items)
    render_report(table, out_dir / "metrics.csv")

    if args.correlation:
        matrix = align_trials([merged.for_system(system) for system in merged.systems()])
        write_correlation_csv(correlation_matrix(matrix), out_dir / "correlation.csv")
    _announce(args, f"✓ Reports written to: {out_dir}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run an intra- or cross-setting experiment from a config file."""
    _banner(args, "STEP 1: Loading Configuration")
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads > 1:
        config.threads = args.threads
    if args.out:
        config.output = Path(args.out)
    if args.pooled:
        config.aggregation = POOLED
    _announce(
        args,
        f"Protocol: {config.protocol}",
        f"Systems: {', '.join(config.all_systems())}",
        f"Runs: {len(config.runs())}",
        f"Aggregation: {config.aggregation}",
    )

    _banner(args, "STEP 2: Evaluating")
    result = run_experiment(config)
    _announce(args, f"✓ {len(result.evaluations)} evaluations over {result.summary.n_runs} runs")

    _banner(args, "STEP 3: Writing Reports")
    written = write_experiment_reports(result, config.output)
    for path in written:
        _announce(args, f"✓ {path}")
    _announce(args, "", format_summary(result.summary))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Write synthetic score files and an experiment config."""
    params = load_params(args.params)
    if args.seed is not None:
        params.seed = args.seed
    config_path = simulate(params, args.out)
    _announce(
        args,
        f"✓ Simulated {params.n_systems} systems over {len(params.runs())} runs",
        f"✓ Experiment config: {config_path}",
    )
    return EXIT_OK


def build_parser() -> ArgumentParser:
    """Build the argument parser with every subcommand."""
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS, help="Override the random seed"
    )
    common.add_argument(
        "--threads",
        type=int,
        default=argparse.SUPPRESS,
        help="Worker threads for rendering and evaluation (default: 1)",
    )
    common.add_argument(
        "--quiet", action="store_true", default=argparse.SUPPRESS, help="Only print warnings"
    )

    parser = ArgumentParser(
        prog="face-fusion-eval",
        description="Face verification score fusion and evaluation toolkit",
        parents=[common],
        epilog="Exit codes: 0 success, 1 invalid input, 2 internal error.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    enlarge = subparsers.add_parser(
        "enlarge", parents=[common], help="Render gallery-enlargement views of a 3D face mesh"
    )
    enlarge.add_argument("--mesh", required=True, help="Wavefront OBJ file")
    enlarge.add_argument("--max-az", type=float, default=30.0, help="Max azimuth (default: 30)")
    enlarge.add_argument("--max-el", type=float, default=30.0, help="Max elevation (default: 30)")
    enlarge.add_argument("--offset", type=float, default=10.0, help="Angle step (default: 10)")
    enlarge.add_argument(
        "--size", type=int, default=128, help="Image side in pixels (default: 128)"
    )
    enlarge.add_argument("--proj", choices=["persp", "ortho"], default="persp")
    enlarge.add_argument("--fov", type=float, default=20.0, help="Field of view in degrees")
    enlarge.add_argument(
        "--distance", type=float, default=8.0, help="Camera distance in mesh radii (default: 8)"
    )
    enlarge.add_argument("--shading", choices=[FLAT, LAMBERT], default=LAMBERT)
    enlarge.add_argument("--out", required=True, help="Output directory")
    enlarge.set_defaults(handler=cmd_enlarge)

    score = subparsers.add_parser(
        "score", parents=[common], help="Score reference/probe embeddings"
    )
    score.add_argument("--references", required=True, help="Reference embeddings (CSV or FEV1)")
    score.add_argument("--probes", required=True, help="Probe embeddings (CSV or FEV1)")
    score.add_argument("--system", required=True, help="System id written on every record")
    score.add_argument("--setting", help="Setting id (default: taken from each probe)")
    score.add_argument("--l2-normalize", action="store_true", help="Unit-normalise embeddings")
    score.add_argument("--out", required=True, help="Output score CSV")
    score.set_defaults(handler=cmd_score)

    fuse = subparsers.add_parser("fuse", parents=[common], help="Fuse systems score-wise")
    fuse.add_argument("files", nargs="+", help="Score CSV files")
    fuse.add_argument(
        "--rule",
        action="append",
        choices=list(RULES),
        help="Fusion rule, repeatable (default: avg)",
    )
    fuse.add_argument("--out", required=True, help="Output score CSV")
    fuse.set_defaults(handler=cmd_fuse)

    evaluate_cmd = subparsers.add_parser(
        "eval", parents=[common], help="Compute metrics and ROC plots"
    )
    evaluate_cmd.add_argument("files", nargs="+", help="Score CSV files")
    evaluate_cmd.add_argument("--out-dir", required=True, help="Output directory")
    evaluate_cmd.add_argument("--points", action="store_true", help="Also dump ROC points")
    evaluate_cmd.add_argument(
        "--pooled", action="store_true", help="Add a pooled row over all settings per system"
    )
    evaluate_cmd.add_argument(
        "--correlation", action="store_true", help="Write the PCC matrix between systems"
    )
    evaluate_cmd.set_defaults(handler=cmd_eval)

    experiment = subparsers.add_parser(
        "experiment", parents=[common], help="Run an intra- or cross-setting experiment"
    )
    experiment.add_argument("--config", required=True, help="Experiment config file")
    experiment.add_argument("--out", help="Override the output directory")
    experiment.add_argument(
        "--pooled", action="store_true", help="Aggregate pooled scores instead of macro"
    )
    experiment.set_defaults(handler=cmd_experiment)

    sim = subparsers.add_parser(
        "simulate", parents=[common], help="Generate correlated synthetic score files"
    )
    sim.add_argument("--params", required=True, help="Simulation parameter file")
    sim.add_argument("--out", required=True, help="Output directory")
    sim.set_defaults(handler=cmd_simulate)
    return parser


def _setup_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and run the chosen subcommand.

    Returns:
        0 on success, 1 on invalid input, 2 on an internal error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        return int(e.code or 0)

    for name, default in (("seed", None), ("threads", 1), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    _setup_logging(args.quiet)

    try:
        if args.threads < 1:
            raise UsageError(f"--threads must be at least 1, got {args.threads}")
        return args.handler(args)
    except ValidationError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception("Internal error")
        print(f"✗ Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
