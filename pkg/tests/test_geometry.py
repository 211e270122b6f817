import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import geometry as geo
from cellbounds.errors import DegenerateGeometryError, DependentNormalsError, GeometryError


def unit_tet():
    return geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_square_basics():
    sq = geo.rectangle(1.0, 1.0)
    assert sq.kind == geo.CellKind.QUADRILATERAL
    assert geo.measure(sq) == pytest.approx(1.0)
    assert geo.diameter(sq) == pytest.approx(math.sqrt(2))
    assert [geo.measure(sq, i) for i in range(4)] == pytest.approx([1, 1, 1, 1])
    assert geo.is_convex(sq)


def test_tetrahedron_measure_and_normals():
    t = unit_tet()
    assert geo.measure(t) == pytest.approx(1 / 6)
    c = geo.centroid(t)
    for i in range(4):
        n = geo.outward_unit_normal(t, i)
        assert np.linalg.norm(n) == pytest.approx(1.0)
        # outward: points away from the centroid
        assert n @ (t.face_points(i).mean(axis=0) - c) > 0


def test_divergence_theorem_on_faces():
    # sum_f |f| n_f = 0 on any closed cell
    for cell in (unit_tet(), geo.box(1, 2, 3), geo.pyramid([0.2, 0.3, 1], [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])):
        s = sum(geo.measure(cell, i) * geo.outward_unit_normal(cell, i) for i in range(len(cell.faces)))
        assert np.allclose(s, 0, atol=1e-12)


def test_degenerate_rejected():
    with pytest.raises(DegenerateGeometryError):
        geo.polygon([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(GeometryError):
        geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


def test_clockwise_input_is_reoriented():
    cw = geo.polygon([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert geo.measure(cw) == pytest.approx(1.0)
    n = geo.outward_unit_normal(cw, 0)  # edge x1 = 0
    assert np.allclose(n, [-1, 0])


def test_curvilinear_mean_normal_is_short():
    t = np.linspace(0, math.pi / 2, 33)
    arc = np.c_[np.cos(t), np.sin(t)]
    cell = geo.polygon([[0, 0], [1, 0], [0, 1]], subfacets={1: arc})
    m = geo.mean_normal(cell, 1)
    # quarter circle: (1/|arc|) int n ds = (2/pi, 2/pi)
    assert m == pytest.approx([2 / math.pi, 2 / math.pi], rel=2e-3)
    assert np.linalg.norm(m) < 1.0


def test_triangle_sigma_two_forms_agree():
    tri = geo.triangle([[0, 0], [2, 0], [0.4, 1.3]])
    for g in range(3):
        assert geo.sigma_alpha_beta(tri, g) == pytest.approx(geo.sigma_vector_form(tri, g), rel=1e-12)


def test_normal_system_validity():
    sq = geo.rectangle(1, 1)
    ns = geo.normal_system(sq, (3, 0))
    assert abs(ns.det) == pytest.approx(1.0)
    with pytest.raises(DependentNormalsError):
        geo.normal_system(sq, (1, 3))  # opposite sides


def test_t_matrix_closed_form_matches_jacobi():
    ns = geo.NormalSystem.from_vectors([[1, 0], [math.cos(0.3), math.sin(0.3)]])
    a = geo.t_matrix(ns).lambda_min
    b = geo.t_matrix(ns, method="jacobi").lambda_min
    assert a == pytest.approx(b, abs=1e-12)
    assert a == pytest.approx(1 - math.cos(0.3))


def test_macrocell_faces_and_union():
    a = geo.triangle([[0, 0], [1, 0], [1, 1]])
    b = geo.triangle([[0, 0], [1, 1], [0, 1]])
    m = geo.macrocell([a, b])
    assert len(m.faces) == 4
    assert geo.measure(m) == pytest.approx(1.0)
    cell, fmap = geo.union_polygon([a, b])
    assert geo.measure(cell) == pytest.approx(1.0)
    assert len(cell.faces) == 4
    assert len(fmap) == 4


def test_decomposition_covers_cell():
    for cell in (geo.rectangle(1, 2), unit_tet(), geo.box(1, 1, 2), geo.prism([[0, 0], [1, 0], [0, 1]], [1, 2, 1.5])):
        d = geo.decompose(cell)
        pts = d.points[d.simplices]
        vol = np.abs(np.linalg.det(pts[:, 1:] - pts[:, :1])) / math.factorial(cell.dim)
        assert vol.sum() == pytest.approx(geo.measure(cell), rel=1e-12)


def test_chord_decomposition_tags_chord():
    sq = geo.rectangle(1, 1)
    d = geo.chord_decomposition(sq, [0, 0], [1, 1], tag="diag")
    assert "diag" in d.facet_tags.values()


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.1, 3.0),
    st.floats(-math.pi, math.pi),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.integers(0, 10_000),
)
def test_rigid_motion_and_scaling_invariance(s, angle, shift, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (3, 2))
    try:
        tri = geo.triangle(pts)
    except GeometryError:
        return
    if geo.measure(tri) < 1e-3:
        return
    r = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = geo.transform(tri, r, shift, s)
    assert geo.measure(moved) == pytest.approx(s * s * geo.measure(tri), rel=1e-9)
    assert geo.diameter(moved) == pytest.approx(s * geo.diameter(tri), rel=1e-9)
    for i in range(3):
        assert geo.outward_unit_normal(moved, i) == pytest.approx(r @ geo.outward_unit_normal(tri, i), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_3d_rotation_keeps_measures(seed):
    rng = np.random.default_rng(seed)
    q = geo.rotation_matrix(3, rng)
    t = unit_tet()
    moved = geo.transform(t, q, rng.standard_normal(3), 2.0)
    assert geo.measure(moved) == pytest.approx(8 / 6)
    assert [geo.measure(moved, i) for i in range(4)] == pytest.approx([4 * geo.measure(t, i) for i in range(4)])
