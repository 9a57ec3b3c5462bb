"""Tests for report tables and charts."""

import re
import xml.etree.ElementTree as ET

import pytest

from face_fusion_eval.errors import FormatError, ValidationError
from face_fusion_eval.harness import METRIC_NAMES, SETTING_IDS
from face_fusion_eval.report import (
    ReportTable,
    read_report_csv,
    render_bar_chart,
    render_report,
    write_report_csv,
)

BAR_ID = re.compile(r'id="bar-\d+-\d+"')


def _table(methods, settings):
    rows = []
    for m, method in enumerate(methods):
        for s, setting in enumerate(settings):
            rows.append(((method, setting), (70.0 + m + 0.5 * s, 12.5, 1.25, 30.0, 41.5)))
    return ReportTable(("method", "setting"), rows)


def test_single_row_chart(tmp_path):
    """Test that one row draws one bar in a well-formed SVG."""
    path = render_bar_chart(_table(["sysA"], ["cam1_d1"]), tmp_path / "one.svg")
    ET.fromstring(path.read_bytes())
    text = path.read_text()
    assert BAR_ID.findall(text) == ['id="bar-0-0"']


def test_full_grid_chart(tmp_path):
    """Test one bar per method and setting for 7 methods over 15 settings."""
    methods = ["a", "b", "c", "fusion:avg(a,b,c)", "fusion:min(a,b,c)", "fusion:max(a,b,c)", "x"]
    path = render_bar_chart(_table(methods, SETTING_IDS), tmp_path / "grid.svg", "eer_pct")
    assert len(set(BAR_ID.findall(path.read_text()))) == 105


def test_report_csv_round_trip(tmp_path):
    """Test that a written table reads back unchanged."""
    table = _table(["a", "fusion:avg(a,b)"], ["cam1_d1", "cam2_d3"])
    loaded = read_report_csv(write_report_csv(table, tmp_path / "t.csv"))
    assert loaded.key_columns == ("method", "setting")
    assert loaded.rows == table.rows
    assert loaded.header == ["method", "setting"] + list(METRIC_NAMES)


def test_report_csv_is_byte_identical(tmp_path):
    """Test that the same table always produces the same bytes."""
    table = _table(["a", "b"], ["cam1_d1"])
    first = write_report_csv(table, tmp_path / "1.csv").read_bytes()
    second = write_report_csv(table, tmp_path / "2.csv").read_bytes()
    assert first == second
    assert first.decode().splitlines()[0] == "method,setting," + ",".join(METRIC_NAMES)


def test_read_report_csv_rejects_bad_header(tmp_path):
    """Test that the metric columns are required."""
    path = tmp_path / "bad.csv"
    path.write_text("method,auc_pct\na,90\n")
    with pytest.raises(FormatError, match="header must end with"):
        read_report_csv(path)


def test_empty_table_is_rejected(tmp_path):
    """Test that neither the CSV nor the chart accepts an empty table."""
    empty = ReportTable(("method",), [])
    with pytest.raises(ValidationError, match="empty"):
        render_report(empty, tmp_path / "e.csv", tmp_path / "e.svg")
    with pytest.raises(ValidationError, match="empty"):
        render_bar_chart(empty, tmp_path / "e.svg")
    assert not (tmp_path / "e.csv").exists()


def test_table_rejects_mismatched_rows():
    """Test row shape validation."""
    with pytest.raises(ValidationError, match="does not match"):
        ReportTable(("method", "setting"), [(("a",), (1.0, 2.0, 3.0, 4.0, 5.0))])
