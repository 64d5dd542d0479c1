"""CSV readers and the SVG renderers."""

import numpy as np
import pytest

from dfreg.errors import ConfigError, ParseError
from dfreg.plots import (export_plots, heatmap, line_chart, read_csv,
                         read_spectrum_csv)


def test_read_csv_skips_comments(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("# a comment\na,b\n1,2\n# mid comment\n3,4\n")
    header, rows = read_csv(p)
    assert header == ["a", "b"]
    assert rows == [{"a": "1", "b": "2"}, {"a": "3", "b": "4"}]


def test_read_csv_cell_count_mismatch(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("a,b\n1,2,3\n")
    with pytest.raises(ParseError, match="3 cells"):
        read_csv(p)


def test_read_csv_empty_file(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("# only comments\n")
    with pytest.raises(ParseError, match="no header"):
        read_csv(p)


def test_read_spectrum_csv(tmp_path):
    p = tmp_path / "spectrum_x.csv"
    p.write_text("# layer=x\n1.0,2.0\n3.0,4.0\ndc_fraction=0.5\n"
                 "low_frequency_ratio=0.75\n")
    grid, sidecar = read_spectrum_csv(p)
    assert np.array_equal(grid, [[1.0, 2.0], [3.0, 4.0]])
    assert sidecar == {"dc_fraction": 0.5, "low_frequency_ratio": 0.75}


def test_read_spectrum_csv_without_grid(tmp_path):
    p = tmp_path / "spectrum_x.csv"
    p.write_text("# layer=x\ndc_fraction=0.5\n")
    with pytest.raises(ParseError, match="no spectrum grid"):
        read_spectrum_csv(p)


def test_line_chart_is_deterministic_svg():
    series = {"plain-s0": ([0, 1, 2], [0.5, 0.6, 0.7]),
              "dfreg-s0": ([0, 1, 2], [0.5, 0.65, 0.8])}
    a = line_chart(series, "test_acc by epoch", "epoch", "accuracy")
    b = line_chart(series, "test_acc by epoch", "epoch", "accuracy")
    assert a == b
    assert a.startswith("<svg ") and a.endswith("</svg>\n")
    assert "polyline" in a and "plain-s0" in a


def test_line_chart_drops_non_finite_points():
    series = {"r": ([0, 1, 2], [float("nan"), 0.5, 0.6])}
    svg = line_chart(series, "t", "x", "y")
    assert svg.count("polyline") == 1
    with pytest.raises(ConfigError, match="no finite data"):
        line_chart({"r": ([0], [float("nan")])}, "t", "x", "y")


def test_line_chart_constant_series():
    svg = line_chart({"c": ([0, 1], [0.5, 0.5])}, "t", "x", "y")
    assert "polyline" in svg


def test_line_chart_escapes_markup():
    svg = line_chart({"a<b&c": ([0, 1], [0.0, 1.0])}, "x<y", "x", "y")
    assert "a&lt;b&amp;c" in svg and "x&lt;y" in svg


def test_heatmap_scales_and_bounds():
    grid = np.array([[1.0, 2.0], [3.0, 4.0]])
    linear = heatmap(grid, "t", scale="linear")
    log = heatmap(grid, "t", scale="log")
    assert linear != log
    assert "scale=linear min=1.0 max=4.0" in linear
    assert "#000000" in linear and "#ffffff" in linear
    with pytest.raises(ConfigError, match="scale"):
        heatmap(grid, "t", scale="sqrt")


def test_heatmap_constant_grid_is_mid_gray():
    svg = heatmap(np.full((2, 2), 3.0), "t")
    assert svg.count("#808080") == 4


def test_export_plots_rejects_bad_scale(tmp_path):
    with pytest.raises(ConfigError, match="spectrum scale"):
        export_plots(tmp_path, tmp_path / "out", spectrum_scale="cubic")


def test_export_plots_requires_metrics(tmp_path):
    with pytest.raises(ConfigError, match="no metrics.csv"):
        export_plots(tmp_path, tmp_path / "out")
