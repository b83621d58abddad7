import numpy as np
import pytest

from boxlens.errors import ConfigError
from boxlens.svgplot import bar_chart, heatmap, line_plot


class TestLinePlot:
    def test_well_formed_and_deterministic(self):
        xs = np.linspace(0, 1, 20)
        series = [("a", xs, np.sin(xs)), ("b", xs, np.cos(xs))]
        svg = line_plot(series, title="curves", rug=(0.25, 0.5))
        assert svg.startswith("<svg")
        assert svg.rstrip().endswith("</svg>")
        assert svg.count("<polyline") == 2
        assert svg == line_plot(series, title="curves", rug=(0.25, 0.5))

    def test_escapes_markup_in_title(self):
        svg = line_plot([("", [0, 1], [0, 1])], title="a<b&c")
        assert "a&lt;b&amp;c" in svg

    def test_constant_series_does_not_divide_by_zero(self):
        svg = line_plot([("", [0.0, 1.0], [5.0, 5.0])])
        assert "<polyline" in svg

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            line_plot([])


class TestBarChart:
    def test_signed_bars(self):
        svg = bar_chart(["up", "down"], [2.0, -1.0], title="t")
        assert svg.count("<rect") >= 3  # background + two bars
        assert "up" in svg and "down" in svg

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            bar_chart([], [])


class TestHeatmap:
    def test_grid_of_cells(self):
        m = np.arange(12.0).reshape(3, 4)
        svg = heatmap(m, x_edges=[0, 1, 2, 3], y_edges=[0, 1, 2])
        # background + (3-1)*(4-1) cells
        assert svg.count("<rect") == 1 + 6

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            heatmap(np.zeros((2, 2)), [0, 1, 2], [0, 1])
