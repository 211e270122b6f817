import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import geometry as geo
from cellbounds.cellmesh import square_mesh, triangle_mesh
from cellbounds.cli_io import (
    cells_identical,
    meshes_identical,
    parse_cell,
    parse_mesh,
    serialize_cell,
    serialize_mesh,
)
from cellbounds.errors import GeometryError, ParseError

SQUARE = """\
# unit square
DIMENSION 2
KIND Quadrilateral
VERTICES 4
0 0
1 0
1 1
0 1
GAMMA 3
"""

TET = """\
DIMENSION 3
KIND Tetrahedron
VERTICES 4
0 0 0
1 0 0
0 1 0
0 0 1
FACES 4
1 2 3
0 2 3
0 1 3
0 1 2
"""


def test_parse_square():
    doc = parse_cell(SQUARE)
    assert doc.cell.kind == geo.CellKind.QUADRILATERAL
    assert geo.measure(doc.cell) == pytest.approx(1.0)
    assert doc.gamma == (3,)


def test_parse_tetrahedron():
    doc = parse_cell(TET)
    assert geo.measure(doc.cell) == pytest.approx(1 / 6)


def test_out_of_range_face_index():
    bad = TET.replace("0 1 2\n", "0 1 7\n")
    with pytest.raises(ParseError, match="line 12"):
        parse_cell(bad)


@pytest.mark.parametrize(
    "text,msg",
    [
        ("KIND Triangle\n", "DIMENSION"),
        ("DIMENSION 2\nKIND Blob\nVERTICES 3\n0 0\n1 0\n0 1\n", "KIND"),
        ("DIMENSION 2\nKIND Triangle\nVERTICES 3\n0 0\n1 x\n0 1\n", "line 5"),
        ("DIMENSION 2\nKIND Triangle\nVERTICES 4\n0 0\n1 0\n0 1\n", "end of document"),
        (SQUARE.replace("GAMMA 3", "GAMMA 9"), "GAMMA"),
    ],
)
def test_parse_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        parse_cell(text)


def test_kind_mismatch_is_a_geometry_error():
    with pytest.raises((GeometryError, ParseError)):
        parse_cell(SQUARE.replace("Quadrilateral", "Triangle"))


def test_degenerate_cell_named():
    text = "DIMENSION 2\nKIND Triangle\nVERTICES 3\n0 0\n1 0\n2 0\n"
    with pytest.raises(GeometryError, match="invalid cell"):
        parse_cell(text)


CELLS = [
    geo.rectangle(1.0, 0.1 + 1 / 3),
    geo.right_triangle(math.pi),
    geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0.2, 1, 0], [0.1, 0.3, 1.7]]),
    geo.box(1, 2, 3),
    geo.prism([[0, 0], [1, 0], [0, 1]], [1.0, 1.2, 0.8]),
    geo.prism([[0, 0], [1, 0], [1, 1], [0, 1]], [1.0, 1.1, 1.3, 1.2]),
    geo.pyramid([0.5, 0.5, 1], [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]),
    geo.polygon([[0, 0], [1, 0], [0, 1]], subfacets={1: np.c_[np.cos(np.linspace(0, math.pi / 2, 9)), np.sin(np.linspace(0, math.pi / 2, 9))]}),
]


@pytest.mark.parametrize("cell", CELLS, ids=lambda c: c.kind.value)
def test_cell_round_trip(cell):
    text = serialize_cell(cell, (0,))
    doc = parse_cell(text)
    assert cells_identical(cell, doc.cell)
    assert doc.gamma == (0,)
    assert serialize_cell(doc.cell, doc.gamma) == text


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False), min_size=8, max_size=8))
def test_round_trip_is_bitwise(xs):
    pts = np.array(xs).reshape(4, 2)
    try:
        cell = geo.polygon(pts)
    except GeometryError:
        return
    doc = parse_cell(serialize_cell(cell))
    assert np.array_equal(doc.cell.vertices, cell.vertices)


def test_mesh_round_trip_with_values():
    m = triangle_mesh(3, h=1 / 3)
    vals = np.random.default_rng(0).standard_normal((len(m), 2))
    doc = parse_mesh(serialize_mesh(m, vals))
    assert meshes_identical(m, doc.mesh)
    assert np.array_equal(doc.values, vals)
    assert len(doc.mesh.faces) == len(m.faces)


def test_mesh_hull_check():
    text = serialize_mesh(square_mesh(2)).replace("HULL 4.0", "HULL 5.0")
    with pytest.raises(GeometryError):
        parse_mesh(text)


def test_mesh_face_shared_three_times():
    text = (
        "DIMENSION 2\nVERTICES 5\n0 0\n1 0\n0 1\n1 1\n-1 0.5\n"
        "CELLS 3\nTriangle 0 1 2\nTriangle 1 3 2\nTriangle 0 2 4\n"
    )
    # 0-2 is shared by the first and third cells only: valid
    parse_mesh(text)
    text3 = text.replace("CELLS 3", "CELLS 4") + "Triangle 2 0 4\n"
    with pytest.raises((GeometryError, ParseError)):
        parse_mesh(text3)


def test_mesh_bad_vertex_index():
    text = "DIMENSION 2\nVERTICES 3\n0 0\n1 0\n0 1\nCELLS 1\nTriangle 0 1 5\n"
    with pytest.raises(ParseError, match="line 7"):
        parse_mesh(text)
