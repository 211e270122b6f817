import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import geometry as geo
from cellbounds import interpolation as ip
from cellbounds.cellmesh import square_mesh, triangle_mesh
from cellbounds.errors import DependentNormalsError, PreconditionError
from cellbounds.fields import constant, parse_field, random_polynomial


def halves():
    return geo.macrocell([geo.triangle([[0, 0], [1, 0], [1, 1]]), geo.triangle([[0, 0], [1, 1], [0, 1]])])


def test_mean_domain_value():
    sq = geo.rectangle(1, 1)
    pc = ip.interp_mean_domain(parse_field("x1^2*x2", 2), sq)
    assert pc.values[0] == pytest.approx(1 / 6, abs=1e-14)
    assert pc.bound == pytest.approx(math.sqrt(2) / math.pi)


def test_mean_face_value_and_bound():
    tri = geo.right_triangle(1.0)
    pc = ip.interp_mean_face(parse_field("x1", 2), tri, 0)  # leg on x2 = 0
    assert pc.values[0] == pytest.approx(0.5, abs=1e-14)
    assert pc.bound == pytest.approx(0.4929, abs=1e-4)
    pc2 = ip.interp_mean_face(parse_field("x1", 2), tri, 0, c_gamma=0.7, trace_constant=0.9)
    assert pc2.bound == pytest.approx(0.7)
    assert pc2.info["trace_bound"] == 0.9


def test_vector_cell_preserves_flux():
    sq = geo.rectangle(1, 1)
    v = parse_field("[x2; x1]", 2)
    pc = ip.interp_vector_cell(v, sq, (3, 0))
    # left edge: int (-v1) = -1/2; bottom edge: int (-v2) = -1/2
    assert pc.values[0] == pytest.approx([0.5, 0.5], abs=1e-14)
    assert pc.residual <= 1e-12


def test_vector_cell_dependent_faces():
    with pytest.raises(DependentNormalsError):
        ip.interp_vector_cell(parse_field("[x2; x1]", 2), geo.rectangle(1, 1), (0, 2))


def test_vector_cell_curvilinear_face_has_no_closed_bound():
    t = np.linspace(0, math.pi / 2, 17)
    cell = geo.polygon([[0, 0], [1, 0], [0, 1]], subfacets={1: np.c_[np.cos(t), np.sin(t)]})
    pc = ip.interp_vector_cell(constant([1.0, 2.0]), cell, (0, 1))
    assert pc.values[0] == pytest.approx([1.0, 2.0], abs=1e-13)
    assert pc.bound is None and "bound_note" in pc.info


def test_macrocell_scalar_and_vector():
    m = halves()
    w = parse_field("x1*x2", 2)
    pc = ip.interp_macrocell_scalar(w, m, (0, 2))
    assert len(pc.values) == 2
    with pytest.raises(PreconditionError):
        ip.interp_macrocell_scalar(w, m, (0,))
    v = parse_field("[x2; x1^2]", 2)
    pv = ip.interp_macrocell_vector(v, m, gammas=(0, 2))
    assert pv.values.shape == (2, 2)
    assert pv.residual <= 1e-12
    # both halves form one pair, so they share a single constant vector
    assert np.allclose(pv.values[0], pv.values[1])


def test_pair_plan_odd_count_self_pairs():
    kids = [
        geo.triangle([[0, 0], [1, 0], [0.5, 1]]),
        geo.triangle([[1, 0], [1.5, 1], [0.5, 1]]),
        geo.triangle([[1, 0], [2, 0], [1.5, 1]]),
    ]
    m = geo.macrocell(kids)
    plan = ip.pair_plan(m, (0, 1, 0))
    covered = sorted(c for p in plan for c in p.children)
    assert covered == [0, 1, 2]
    assert any(len(p.children) == 1 for p in plan)


def test_mesh_plans():
    mesh = square_mesh(3)
    w = parse_field("sin(pi*x1)*cos(pi*x2)", 2)
    first = ip.interp_mesh_scalar(w, mesh)
    every = ip.interp_mesh_scalar(w, mesh, "all")
    assert first.info["plan"][0] == (0,)
    assert every.info["plan"][0] == (0, 1, 2, 3)
    assert every.bound < first.bound
    with pytest.raises(PreconditionError):
        ip.interp_mesh_scalar(w, mesh, [0, 1])
    with pytest.raises(PreconditionError):
        ip.interp_mesh_scalar(w, mesh, [7] * len(mesh))


def test_mesh_vector_triangles():
    mesh = triangle_mesh(2)
    v = parse_field("[x2; x1]", 2)
    pc = ip.interp_mesh_vector(v, mesh)
    assert ip.mesh_flux_residual(v, mesh, pc) <= 1e-12
    err, grad = ip.error_norms(v, pc)
    assert err <= pc.bound * grad


@pytest.mark.parametrize("op", ["domain", "face", "vector", "mesh", "meshvec", "macro", "macrovec"])
def test_constants_reproduced(op):
    sq = geo.rectangle(1, 1)
    mesh = square_mesh(2)
    c, cv = 1.2345678901234567, np.array([-0.3, 7.1])
    call = {
        "domain": lambda: ip.interp_mean_domain(constant(c), sq),
        "face": lambda: ip.interp_mean_face(constant(c), sq, 2),
        "vector": lambda: ip.interp_vector_cell(constant(cv), sq, (0, 1)),
        "mesh": lambda: ip.interp_mesh_scalar(constant(c), mesh, "all"),
        "meshvec": lambda: ip.interp_mesh_vector(constant(cv), mesh),
        "macro": lambda: ip.interp_macrocell_scalar(constant(c), halves(), (0, 2)),
        "macrovec": lambda: ip.interp_macrocell_vector(constant(cv), halves(), gammas=(0, 2)),
    }[op]
    pc = call()
    target = cv if op.endswith("vec") or op == "vector" else c
    assert np.abs(pc.values - target).max() <= 1e-14 * max(1.0, float(np.abs(target).max()))
    assert ip.error_norms(constant(target), pc)[0] <= 1e-13


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 2))
def test_estimate_holds_random_polynomials(seed, face):
    rng = np.random.default_rng(seed)
    tri = geo.right_triangle(1.0)
    w = random_polynomial(2, 3, rng)
    pc = ip.interp_mean_face(w, tri, face)
    err, grad = ip.error_norms(w, pc)
    assert err <= pc.bound * grad + 1e-9
    assert pc.residual <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_vector_estimate_tetrahedron(seed):
    rng = np.random.default_rng(seed)
    tet = geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    v = random_polynomial(3, 2, rng, components=3)
    pc = ip.interp_vector_cell(v, tet, (0, 1, 2))
    err, grad = ip.error_norms(v, pc)
    assert err <= pc.bound * grad + 1e-9
    assert pc.residual <= 1e-12


def test_comparison_report_triangle():
    rep = ip.comparison_table("Triangle", level=4)
    text = rep.text()
    for s in ("0.4502h", "0.4929h", "0.3183h", "0.3485h"):
        assert s in text
    assert "discrepancy" in text
    assert all(r.oracle is not None for r in rep.rows)


def test_comparison_report_square():
    rep = ip.comparison_table("Square", level=4)
    assert any("pi/h" in r.note for r in rep.rows)
    assert len(rep.rows) == 5
