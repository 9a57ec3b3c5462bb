"""Tests for the command-line interface."""

from unittest.mock import patch

import numpy as np
import pytest
from conftest import make_score_set

from face_fusion_eval.cli import build_parser, main
from face_fusion_eval.formats import read_scores, write_embeddings, write_scores
from face_fusion_eval.harness import METRIC_NAMES
from face_fusion_eval.report import read_report_csv
from face_fusion_eval.scores import Embedding


def test_parser_has_every_command():
    """Test subcommand registration."""
    parser = build_parser()
    args = parser.parse_args(["eval", "a.csv", "--out-dir", "out"])
    assert args.command == "eval"
    assert args.files == ["a.csv"]


def test_eval_separated_scores(tmp_path, separated_set, capsys):
    """Test eval on perfectly separated scores."""
    scores = write_scores(tmp_path / "a.csv", separated_set)
    code = main(["eval", str(scores), "--out-dir", str(tmp_path / "out"), "--points"])
    assert code == 0
    assert "AUC 100.0" in capsys.readouterr().out
    assert (tmp_path / "out" / "metrics.csv").is_file()
    assert (tmp_path / "out" / "roc_sysA_cam1_d1.svg").is_file()
    assert (tmp_path / "out" / "roc_sysA_cam1_d1.csv").is_file()


def test_fuse_one_system_fails(tmp_path, separated_set, capsys):
    """Test that fusing a single system exits with an input error."""
    scores = write_scores(tmp_path / "a.csv", separated_set)
    code = main(["fuse", str(scores), "--out", str(tmp_path / "f.csv")])
    assert code == 1
    assert "fusion requires ≥ 2 systems" in capsys.readouterr().err
    assert not (tmp_path / "f.csv").exists()


def test_fuse_two_systems(tmp_path):
    """Test fusion of two score files with two rules."""
    a = write_scores(tmp_path / "a.csv", make_score_set("a", [0.9, 0.7], [0.2, 0.4]))
    b = write_scores(tmp_path / "b.csv", make_score_set("b", [0.5, 0.9], [0.3, 0.1]))
    out = tmp_path / "fused.csv"
    code = main(
        ["--quiet", "fuse", str(a), str(b), "--rule", "min", "--rule", "max", "--out", str(out)]
    )
    assert code == 0
    fused = read_scores(out)
    assert fused.systems() == ["fusion:max(a,b)", "fusion:min(a,b)"]
    assert len(fused) == 8


def test_score_command(tmp_path):
    """Test scoring embeddings into a score file."""
    references = [Embedding("s1", "r", None, np.array([0.0, 0.0]))]
    probes = [Embedding("s1", "p", None, np.array([3.0, 4.0]))]
    refs = write_embeddings(tmp_path / "refs.csv", references)
    prbs = write_embeddings(tmp_path / "probes.csv", probes)
    out = tmp_path / "scores.csv"
    code = main(
        [
            "score",
            "--references",
            str(refs),
            "--probes",
            str(prbs),
            "--system",
            "sysA",
            "--setting",
            "cam1_d1",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    assert read_scores(out).records[0].score == pytest.approx(1.0 / 6.0, abs=1e-9)


def test_enlarge_cube(tmp_path, cube_obj):
    """Test that the default grid writes 49 PNGs and a manifest."""
    mesh = tmp_path / "cube.obj"
    mesh.write_text(cube_obj)
    out = tmp_path / "views"
    code = main(
        ["enlarge", "--mesh", str(mesh), "--size", "32", "--threads", "4", "--out", str(out)]
    )
    assert code == 0
    assert len(list(out.glob("*.png"))) == 49
    assert (out / "manifest.csv").is_file()


def test_enlarge_bad_mesh_names_line(tmp_path, capsys):
    """Test that a mesh error reports file and line."""
    mesh = tmp_path / "bad.obj"
    mesh.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 0\n")
    code = main(["enlarge", "--mesh", str(mesh), "--out", str(tmp_path / "views")])
    assert code == 1
    assert f"{mesh}:4:" in capsys.readouterr().err


def test_simulate_then_experiment(tmp_path):
    """Test the synthetic pipeline end to end."""
    params = tmp_path / "sim.params"
    params.write_text(
        "systems = vgg, facenet, arcface\n"
        "target_auc = 0.74, 0.77, 0.80\n"
        "n_genuine = 300\n"
        "n_impostor = 300\n"
        "settings = cam1_d1, cam2_d2\n"
    )
    sim = tmp_path / "sim"
    assert main(["--quiet", "simulate", "--params", str(params), "--out", str(sim)]) == 0

    report = tmp_path / "report"
    code = main(
        ["experiment", "--config", str(sim / "experiment.cfg"), "--out", str(report), "--quiet"]
    )
    assert code == 0

    summary = report / "intra_summary.csv"
    header = summary.read_text().splitlines()[0]
    assert header == "method," + ",".join(METRIC_NAMES)
    table = read_report_csv(summary)
    assert len(table) == 6
    assert [keys[0] for keys, _ in table.rows][:3] == ["arcface", "facenet", "vgg"]
    for name in ("intra_per_setting.svg", "intra_per_distance.csv", "correlation.csv"):
        assert (report / name).is_file()


def test_experiment_missing_config(tmp_path, capsys):
    """Test that a missing config file is an input error."""
    code = main(["experiment", "--config", str(tmp_path / "none.cfg")])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    """Test that argument errors exit with code 1."""
    assert main(["eval", "--bogus"]) == 1
    assert "✗" in capsys.readouterr().err


def test_version_exits_cleanly(capsys):
    """Test the --version flag."""
    assert main(["--version"]) == 0
    assert "face-fusion-eval" in capsys.readouterr().out


def test_internal_error_exit_code(tmp_path, capsys):
    """Test that an unexpected exception maps to exit code 2."""
    params = tmp_path / "sim.params"
    params.write_text("n_systems = 2\nn_genuine = 20\nn_impostor = 20\n")
    with patch("face_fusion_eval.cli.simulate", side_effect=RuntimeError("disk on fire")):
        code = main(["simulate", "--params", str(params), "--out", str(tmp_path / "sim")])
    assert code == 2
    assert "disk on fire" in capsys.readouterr().err


def test_non_utf8_inputs_are_validation_errors(tmp_path, capsys):
    """Test that undecodable score and mesh files exit with 1 and name the file."""
    scores = tmp_path / "bad.csv"
    scores.write_bytes(b"system_id,setting_id\n\xff\n")
    assert main(["eval", str(scores), "--out-dir", str(tmp_path / "out")]) == 1
    assert str(scores) in capsys.readouterr().err

    mesh = tmp_path / "bad.obj"
    mesh.write_bytes(b"v 0 0 \xff\n")
    assert main(["enlarge", "--mesh", str(mesh), "--out", str(tmp_path / "views")]) == 1
    assert str(mesh) in capsys.readouterr().err
