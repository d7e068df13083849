import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from utils.export import format_value, read_csv, summary_text, write_csv
from utils.graph_generator import Figure, Marker, Series, generate_svg_graph, render_svg

SVG = "{http://www.w3.org/2000/svg}"


def test_values_keep_full_precision(tmp_path):
    values = [1 / 3, math.pi * 1e-12, -2.5e7]
    path = write_csv(tmp_path / "sub" / "values.csv", {"x": values, "label": ["a", "b", "c"]})
    data = read_csv(path)
    assert data["x"].tolist() == values
    assert data["label"].tolist() == ["a", "b", "c"]


def test_unequal_columns_are_refused(tmp_path):
    with pytest.raises(ValueError, match="unequal"):
        write_csv(tmp_path / "bad.csv", {"x": [1.0, 2.0], "y": [1.0]})


def test_format_and_summary():
    assert format_value(True) == "True"
    assert format_value(None) == ""
    assert format_value(0.1) == "0.10000000000000001"
    assert summary_text({"sigma": 1.5, "kind": "shock"}) == "sigma = 1.5\nkind = shock\n"


def test_svg_structure():
    x = np.linspace(0.0, 2.0, 21)
    fig = Figure(
        title="curves <test>",
        x_label="phi0",
        y_label="stretch",
        series=[Series("first", x, x**2), Series("second & more", x, np.sqrt(x), dashed=True)],
        markers=[Marker(1.0, 1.0, "one")],
        hlines=[(2.5, "level")],
    )
    root = ET.fromstring(render_svg(fig))
    lines = root.findall(f".//{SVG}polyline")
    assert [p.get("data-label") for p in lines] == ["first", "second & more"]
    assert lines[1].get("stroke-dasharray") == "6,4"
    assert len(lines[0].get("points").split()) == 21
    assert root.find(f"{SVG}title").text == "curves <test>"
    assert len(root.findall(f".//{SVG}circle[@class='marker']")) == 1
    lo, hi = (float(v) for v in root.get("data-y-range").split())
    assert lo < 0.0 and hi > 4.0


def test_non_finite_points_are_dropped(tmp_path):
    fig = Figure("gaps", "x", "y", series=[Series("s", [0.0, 1.0, 2.0], [1.0, math.nan, 3.0])])
    path = generate_svg_graph(fig, tmp_path / "gaps.svg")
    root = ET.parse(path).getroot()
    assert len(root.find(f".//{SVG}polyline").get("points").split()) == 2
