import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import geometry as geo
from cellbounds import oracle
from cellbounds import scalar_bounds as sb
from cellbounds.errors import DependentNormalsError, PreconditionError
from cellbounds.oracle.core import _build
from cellbounds.oracle.eigen import smallest_eigenpair


def right_tet():
    return geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_mesh_counts_and_tags():
    sq = geo.rectangle(1, 1)
    m = oracle.triangulate(sq, 2)
    assert m.num_points == 25
    assert len(m.simplices) == 32
    for f in range(4):
        assert m.facet_measures(f).sum() == pytest.approx(1.0)


@pytest.mark.parametrize(
    "cell",
    [geo.rectangle(1, 2), right_tet(), geo.box(1, 1, 2), geo.pyramid([0.5, 0.5, 1], [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])],
)
def test_assembly_identities(cell):
    m = oracle.triangulate(cell, 2)
    s = oracle.assemble(m)
    ones = np.ones(m.num_points)
    assert np.abs(s.stiffness @ ones).max() < 1e-12
    assert ones @ s.mass @ ones == pytest.approx(geo.measure(cell), rel=1e-12)
    for f in range(len(cell.faces)):
        assert s.face_load[f].sum() == pytest.approx(geo.measure(cell, f), rel=1e-12)
    # linear function: int |grad x1|^2 = |Omega|
    x = m.points[:, 0]
    assert x @ s.stiffness @ x == pytest.approx(geo.measure(cell), rel=1e-12)


@pytest.mark.parametrize("mode,gamma", [("cp", None), ("scalar", 0), ("scalar", (0, 1)), ("trace", 1), ("vector", (3, 0))])
def test_eigensolver_matches_dense(mode, gamma):
    sq = geo.quadrilateral([[0, 0], [1.2, 0], [1, 1], [0, 0.8]])
    m = oracle.triangulate(sq, 2)
    s = oracle.assemble(m)
    p = _build(sq, m, s, mode, gamma)
    res = smallest_eigenpair(p.K, p.B, p.C, tol=1e-12)
    c = np.asarray(p.C).reshape(p.K.shape[0], -1)
    z = sla.null_space(c.T)
    k = z.T @ p.K.toarray() @ z
    b = z.T @ p.B.toarray() @ z
    if mode == "trace":
        # B is only semidefinite: the smallest eigenvalue of K u = mu B u is
        # the reciprocal of the largest of B u = nu K u
        nu = sla.eigh(b, k, eigvals_only=True)[-1]
        mu = 1 / nu
    else:
        mu = sla.eigh(k, b, eigvals_only=True)[0]
    assert res.eigenvalue == pytest.approx(mu, rel=1e-9)
    assert np.abs(c.T @ res.vector).max() < 1e-10 * np.linalg.norm(res.vector)


def test_square_values():
    sq = geo.rectangle(1, 1)
    cp = oracle.sharp_cp(sq, level=6)
    assert cp.constant == pytest.approx(1 / math.pi, rel=1e-3)
    assert cp.extrapolated == pytest.approx(1 / math.pi, rel=1e-5)
    side = oracle.sharp_c_gamma(sq, 0, level=6)
    assert side.constant == pytest.approx(2 / math.pi, rel=1e-3)
    # P1 constants approach the exact one from below
    consts = [r.constant for r in side.rows]
    assert consts == sorted(consts)
    assert consts[-1] <= 2 / math.pi


def test_vector_square_adjacent_sides():
    sq = geo.rectangle(1, 1)
    r = oracle.sharp_vector_constant(sq, (3, 0), level=5)
    assert r.constant <= 2 / math.pi
    assert r.constant == pytest.approx(2 / math.pi, rel=1e-3)


def test_vector_needs_independent_faces():
    with pytest.raises(DependentNormalsError):
        oracle.sharp_vector_constant(geo.rectangle(1, 1), (1, 3), level=2)
    with pytest.raises(PreconditionError):
        oracle.sharp_vector_constant(geo.rectangle(1, 1), (1,), level=2)


def test_right_tet_base_small_level():
    r = oracle.sharp_c_gamma(right_tet(), 3, level=4)
    assert r.constant == pytest.approx(0.3756, rel=0.01)
    assert r.constant <= sb.c_gamma_tetrahedron(right_tet(), 3).value


def test_chord_gamma():
    sq = geo.rectangle(1, 1)
    dec = geo.chord_decomposition(sq, [0, 0], [1, 1], tag="diag")
    r = oracle.sharp_c_gamma(sq, "diag", level=6, decomposition=dec)
    assert r.constant == pytest.approx(1 / 2.8692, rel=2e-3)


def test_max_level_respects_budget():
    lev = oracle.max_level(right_tet(), 5000)
    assert oracle.triangulate(right_tet(), lev).num_points <= 5000
    assert oracle.triangulate(right_tet(), lev + 1).num_points > 5000


def test_convergence_table_formats():
    r = oracle.sharp_c_gamma(geo.right_triangle(1.0), 0, level=4)
    txt = oracle.convergence_table(r)
    assert "level" in txt and str(r.rows[-1].unknowns) in txt
    csv = oracle.convergence_table(r, fmt="csv")
    assert len(csv.strip().splitlines()) == len(r.rows) + 1


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 1000))
def test_rayleigh_samples_never_exceed_oracle(seed):
    tri = geo.right_triangle(1.0)
    top = oracle.sharp_c_gamma(tri, 0, level=3, levels=1).constant
    assert oracle.rayleigh_sample(tri, 0, 50, seed=seed, level=3) <= top * (1 + 1e-10)
    near = oracle.rayleigh_sample(tri, 0, 5, seed=seed, level=3, eigenvector=True)
    assert near == pytest.approx(top, rel=1e-3)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3.0))
def test_constant_scales_with_length(s):
    tri = geo.right_triangle(1.0)
    a = oracle.sharp_c_gamma(tri, 0, level=3, levels=1).constant
    b = oracle.sharp_c_gamma(geo.transform(tri, scale=s), 0, level=3, levels=1).constant
    assert b == pytest.approx(s * a, rel=1e-8)
